#include "polydx/eval.hpp"

#include "polydx/errors.hpp"
#include "polydx/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cctype>
#include <iomanip>
#include <sstream>
#include <thread>

namespace polydx {
namespace {

std::string lower_trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    auto out = s.substr(b, e - b + 1);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// yes/no from a judge completion: the <answer> span when present, otherwise
// the first word. Anything else counts as "no".
bool parse_yes(const std::string& completion) {
    auto answer = extract_tagged_section(completion, "answer");
    auto verdict = lower_trim(answer.text);
    if (answer.missing_tag) {
        auto end = verdict.find_first_of(" \t\r\n.,;:!");
        if (end != std::string::npos) verdict = verdict.substr(0, end);
    }
    return verdict.rfind("yes", 0) == 0;
}

} // namespace

ExactNormalizedMatcher::ExactNormalizedMatcher(SynonymTable synonyms)
    : synonyms_(std::move(synonyms)) {}

MatchVerdict ExactNormalizedMatcher::match(const std::string& predicted, const std::string& gold) {
    auto canon = [this](const std::string& name) {
        auto normalized = normalize_disease_name(name);
        return synonyms_ ? synonyms_->canonical_key(normalized) : normalized;
    };
    MatchVerdict verdict;
    verdict.predicted = predicted;
    verdict.gold = gold;
    verdict.matcher = name();
    verdict.equivalent = !gold.empty() && canon(predicted) == canon(gold);
    return verdict;
}

JudgeMatcher::JudgeMatcher(LlmGateway& gateway, const PromptCatalog& prompts,
                           CompletionRequest base_request, RunRecorder* recorder)
    : gateway_(gateway), prompts_(prompts), base_(std::move(base_request)), recorder_(recorder) {}

MatchVerdict JudgeMatcher::match(const std::string& predicted, const std::string& gold) {
    auto request = base_;
    request.prompt =
        prompts_.render("judge_equivalence", {{"predicted", predicted}, {"gold", gold}});
    auto response = gateway_.complete("judge", request, recorder_);

    MatchVerdict verdict;
    verdict.predicted = predicted;
    verdict.gold = gold;
    verdict.matcher = name();
    verdict.judge_completion = response.text;
    verdict.equivalent = parse_yes(response.text);
    return verdict;
}

bool hit_at_k(const DiseaseList& prediction, const std::string& gold, std::size_t k,
              DiagnosisMatcher& matcher) {
    if (k < 1) throw ConfigError("hit_at_k requires k >= 1");
    auto window = std::min(k, prediction.items.size());
    for (std::size_t i = 0; i < window; ++i) {
        if (matcher.match(prediction.items[i].name, gold).equivalent) return true;
    }
    return false;
}

LlmStepJudge::LlmStepJudge(LlmGateway& gateway, const PromptCatalog& prompts,
                           CompletionRequest base_request, RunRecorder* recorder)
    : gateway_(gateway), prompts_(prompts), base_(std::move(base_request)), recorder_(recorder) {}

bool LlmStepJudge::covers(const std::string& predicted_reasoning, const std::string& gold_step) {
    auto request = base_;
    request.prompt = prompts_.render("judge_step_coverage",
                                     {{"step", gold_step}, {"reasoning", predicted_reasoning}});
    auto response = gateway_.complete("judge", request, recorder_);
    return parse_yes(response.text);
}

std::vector<bool> LlmStepJudge::covers_batch(const std::string& predicted_reasoning,
                                             const std::vector<std::string>& gold_steps) {
    std::string numbered;
    for (std::size_t i = 0; i < gold_steps.size(); ++i) {
        numbered += std::to_string(i + 1) + ". " + gold_steps[i] + "\n";
    }
    auto request = base_;
    request.prompt = prompts_.render("judge_step_coverage_batch",
                                     {{"steps", numbered}, {"reasoning", predicted_reasoning}});
    auto response = gateway_.complete("judge", request, recorder_);

    // lines of the form "N: yes" / "N: no"
    std::vector<bool> verdicts(gold_steps.size(), false);
    std::istringstream lines(response.text);
    std::string line;
    while (std::getline(lines, line)) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        try {
            auto n = std::stoul(line.substr(0, colon));
            if (n >= 1 && n <= verdicts.size()) {
                verdicts[n - 1] = lower_trim(line.substr(colon + 1)).rfind("yes", 0) == 0;
            }
        } catch (const std::exception&) {
            continue;
        }
    }
    return verdicts;
}

std::optional<double> reasoning_recall(const std::string& predicted_reasoning,
                                       const std::string& gold_reasoning, StepJudge& judge) {
    auto steps = segment_trace(gold_reasoning);
    if (steps.empty()) return std::nullopt;
    std::size_t covered = 0;
    for (const auto& step : steps) {
        if (judge.covers(predicted_reasoning, step)) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(steps.size());
}

std::optional<double> reasoning_recall_batched(const std::string& predicted_reasoning,
                                               const std::string& gold_reasoning,
                                               LlmStepJudge& judge) {
    auto steps = segment_trace(gold_reasoning);
    if (steps.empty()) return std::nullopt;
    auto verdicts = judge.covers_batch(predicted_reasoning, steps);
    auto covered = std::count(verdicts.begin(), verdicts.end(), true);
    return static_cast<double>(covered) / static_cast<double>(steps.size());
}

SplitResult seen_unseen_split(const std::vector<CaseReport>& cases,
                              const std::vector<CorpusInstance>& corpus,
                              const SynonymTable& synonyms) {
    std::set<std::string> known;
    for (const auto& instance : corpus) {
        known.insert(synonyms.canonical_key(normalize_disease_name(instance.diagnosis)));
    }

    SplitResult split;
    for (const auto& report : cases) {
        if (report.gold_diagnosis.empty()) {
            split.excluded.push_back(report);
            continue;
        }
        auto key = synonyms.canonical_key(normalize_disease_name(report.gold_diagnosis));
        (known.count(key) ? split.seen : split.unseen).push_back(report);
    }
    return split;
}

EvalHarness::EvalHarness(Pipeline& pipeline, std::shared_ptr<DiagnosisMatcher> matcher,
                         std::shared_ptr<StepJudge> judge)
    : pipeline_(pipeline), matcher_(std::move(matcher)), judge_(std::move(judge)) {
    if (!matcher_) throw ConfigError("evaluation requires a diagnosis matcher");
}

MetricValues EvalHarness::compute_metrics(const std::vector<CaseReport>& cases,
                                          const std::vector<std::optional<CaseOutcome>>& outcomes,
                                          bool compute_recall, bool batched_recall) {
    MetricValues values;
    std::size_t hits1 = 0, hits5 = 0, hits10 = 0;
    double recall_sum = 0.0;
    std::size_t recall_count = 0;

    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& report = cases[i];
        const auto& outcome = outcomes[i];
        if (!outcome || report.gold_diagnosis.empty()) {
            ++values.n_excluded;
            continue;
        }
        ++values.n_cases;

        const auto& ranked = outcome->final.ranked;
        if (hit_at_k(ranked, report.gold_diagnosis, 1, *matcher_)) ++hits1;
        if (hit_at_k(ranked, report.gold_diagnosis, 5, *matcher_)) ++hits5;
        if (hit_at_k(ranked, report.gold_diagnosis, 10, *matcher_)) ++hits10;

        if (compute_recall && judge_) {
            std::optional<double> recall;
            if (report.gold_reasoning.empty()) {
                recall = std::nullopt;
            } else if (batched_recall) {
                auto* llm_judge = dynamic_cast<LlmStepJudge*>(judge_.get());
                recall = llm_judge ? reasoning_recall_batched(outcome->final.reasoning,
                                                              report.gold_reasoning, *llm_judge)
                                   : reasoning_recall(outcome->final.reasoning,
                                                      report.gold_reasoning, *judge_);
            } else {
                recall =
                    reasoning_recall(outcome->final.reasoning, report.gold_reasoning, *judge_);
            }
            if (recall) {
                recall_sum += *recall;
                ++recall_count;
            } else {
                ++values.n_recall_skipped;
            }
        }
    }

    if (values.n_cases > 0) {
        values.hit1 = static_cast<double>(hits1) / static_cast<double>(values.n_cases);
        values.hit5 = static_cast<double>(hits5) / static_cast<double>(values.n_cases);
        values.hit10 = static_cast<double>(hits10) / static_cast<double>(values.n_cases);
    }
    if (recall_count > 0) values.recall = recall_sum / static_cast<double>(recall_count);
    return values;
}

namespace {

MetricValues mean_of(const std::vector<MetricValues>& runs) {
    MetricValues mean;
    if (runs.empty()) return mean;
    double recall_sum = 0.0;
    std::size_t recall_runs = 0;
    for (const auto& run : runs) {
        mean.hit1 += run.hit1;
        mean.hit5 += run.hit5;
        mean.hit10 += run.hit10;
        mean.n_excluded += run.n_excluded;
        mean.n_recall_skipped += run.n_recall_skipped;
        if (run.recall) {
            recall_sum += *run.recall;
            ++recall_runs;
        }
    }
    auto n = static_cast<double>(runs.size());
    mean.hit1 /= n;
    mean.hit5 /= n;
    mean.hit10 /= n;
    mean.n_cases = runs.front().n_cases;
    if (recall_runs > 0) mean.recall = recall_sum / static_cast<double>(recall_runs);
    return mean;
}

} // namespace

MetricReport EvalHarness::run_evaluation(const std::vector<CaseReport>& cases,
                                         const EvalOptions& options) {
    if (options.runs < 1) throw ConfigError("runs must be >= 1");

    MetricReport report;
    std::map<std::string, ModuleCost> cost_totals;
    std::map<std::string, double> latency_totals;
    std::size_t outcome_count = 0;

    std::vector<std::vector<std::optional<CaseOutcome>>> all_outcomes;
    for (std::size_t run = 0; run < options.runs; ++run) {
        std::vector<std::optional<CaseOutcome>> outcomes(cases.size());

        auto parallelism = std::max<std::size_t>(1, options.parallelism);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                auto i = next.fetch_add(1);
                if (i >= cases.size()) return;
                try {
                    outcomes[i] = pipeline_.run_case(cases[i]);
                } catch (const std::exception&) {
                    outcomes[i] = std::nullopt; // excluded with explicit count
                }
            }
        };
        if (parallelism == 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            for (std::size_t t = 0; t < parallelism; ++t) threads.emplace_back(worker);
            for (auto& thread : threads) thread.join();
        }

        for (const auto& outcome : outcomes) {
            if (!outcome) continue;
            ++outcome_count;
            for (const auto& [module, cost] : outcome->record.module_costs()) {
                auto& total = cost_totals[module];
                total.calls += cost.calls;
                total.prompt_tokens += cost.prompt_tokens;
                total.completion_tokens += cost.completion_tokens;
                total.call_latency_seconds += cost.call_latency_seconds;
            }
            for (const auto& [module, seconds] : outcome->record.module_latency_seconds) {
                latency_totals[module] += seconds;
            }
        }

        report.per_run.push_back(
            compute_metrics(cases, outcomes, options.compute_recall, options.batched_recall));
        all_outcomes.push_back(std::move(outcomes));
    }
    report.mean = mean_of(report.per_run);

    if (outcome_count > 0) {
        for (auto& [module, cost] : cost_totals) {
            ModuleCost mean_cost;
            auto n = static_cast<double>(outcome_count);
            mean_cost.calls = static_cast<int>(std::lround(static_cast<double>(cost.calls) / n));
            mean_cost.prompt_tokens =
                static_cast<std::int64_t>(static_cast<double>(cost.prompt_tokens) / n);
            mean_cost.completion_tokens =
                static_cast<std::int64_t>(static_cast<double>(cost.completion_tokens) / n);
            mean_cost.call_latency_seconds = cost.call_latency_seconds / n;
            report.mean_module_cost[module] = mean_cost;
        }
        for (auto& [module, seconds] : latency_totals) {
            report.mean_module_latency_seconds[module] =
                seconds / static_cast<double>(outcome_count);
        }
    }

    if (options.split_seen_unseen && pipeline_.case_database()) {
        auto split = seen_unseen_split(cases, pipeline_.case_database()->corpus(),
                                       pipeline_.synonyms());
        for (const auto& [label, subset] :
             {std::pair{std::string("seen"), &split.seen}, {std::string("unseen"), &split.unseen}}) {
            PartitionReport partition;
            partition.label = label;
            for (std::size_t run = 0; run < options.runs; ++run) {
                std::vector<std::optional<CaseOutcome>> subset_outcomes;
                std::vector<CaseReport> subset_cases;
                for (const auto& report_case : *subset) {
                    for (std::size_t i = 0; i < cases.size(); ++i) {
                        if (cases[i].id == report_case.id) {
                            subset_cases.push_back(cases[i]);
                            subset_outcomes.push_back(all_outcomes[run][i]);
                            break;
                        }
                    }
                }
                partition.per_run.push_back(compute_metrics(subset_cases, subset_outcomes,
                                                            options.compute_recall,
                                                            options.batched_recall));
            }
            partition.mean = mean_of(partition.per_run);
            report.partitions.push_back(std::move(partition));
        }
    }

    return report;
}

std::vector<std::pair<std::string, MetricReport>>
EvalHarness::run_ablation(const std::vector<CaseReport>& cases,
                          const std::vector<Variant>& variants, const EvalOptions& options) {
    auto original_sources = pipeline_.config().sources;
    auto original_strategy = pipeline_.config().strategy;

    std::vector<std::pair<std::string, MetricReport>> reports;
    for (const auto& variant : variants) {
        if (variant.sources.empty()) {
            throw ConfigError("ablation variant '" + variant.name + "' has no sources");
        }
        pipeline_.set_sources(variant.sources);
        pipeline_.set_strategy(variant.strategy);
        reports.emplace_back(variant.name, run_evaluation(cases, options));
    }

    pipeline_.set_sources(original_sources);
    pipeline_.set_strategy(original_strategy);
    return reports;
}

std::vector<EvalHarness::Variant> parse_variants(const std::string& spec_text) {
    const std::set<Source> all{Source::Soap, Source::Web, Source::Case, Source::Trace};

    std::vector<EvalHarness::Variant> variants;
    std::stringstream parts(spec_text);
    std::string token;
    while (std::getline(parts, token, ',')) {
        auto b = token.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        auto e = token.find_last_not_of(" \t");
        token = token.substr(b, e - b + 1);

        EvalHarness::Variant variant;
        variant.name = token;
        if (auto source = source_from_string(token); source && *source != Source::Final) {
            variant.sources = {*source};
        } else if (auto strategy = strategy_from_string(token)) {
            variant.sources = all;
            variant.strategy = *strategy;
        } else {
            throw ConfigError("unknown ablation variant: " + token);
        }
        variants.push_back(std::move(variant));
    }
    return variants;
}

namespace {

std::string fmt(double value) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << value;
    return out.str();
}

std::string fmt(const std::optional<double>& value) { return value ? fmt(*value) : "n/a"; }

void append_rows(std::ostringstream& out, const std::vector<MetricValues>& per_run,
                 const MetricValues& mean) {
    out << std::left << std::setw(10) << "" << std::setw(9) << "Recall" << std::setw(8) << "H@1"
        << std::setw(8) << "H@5" << std::setw(8) << "H@10" << std::setw(7) << "Cases"
        << "Excluded\n";
    for (std::size_t i = 0; i < per_run.size(); ++i) {
        const auto& run = per_run[i];
        out << std::left << std::setw(10) << ("run " + std::to_string(i + 1)) << std::setw(9)
            << fmt(run.recall) << std::setw(8) << fmt(run.hit1) << std::setw(8) << fmt(run.hit5)
            << std::setw(8) << fmt(run.hit10) << std::setw(7) << run.n_cases << run.n_excluded
            << "\n";
    }
    out << std::left << std::setw(10) << "mean" << std::setw(9) << fmt(mean.recall) << std::setw(8)
        << fmt(mean.hit1) << std::setw(8) << fmt(mean.hit5) << std::setw(8) << fmt(mean.hit10)
        << std::setw(7) << mean.n_cases << mean.n_excluded << "\n";
}

} // namespace

std::string format_report(const MetricReport& report) {
    std::ostringstream out;
    append_rows(out, report.per_run, report.mean);

    for (const auto& partition : report.partitions) {
        out << "\n[" << partition.label << "]\n";
        append_rows(out, partition.per_run, partition.mean);
    }

    if (!report.mean_module_cost.empty()) {
        out << "\nPer-case cost (mean)\n";
        out << std::left << std::setw(12) << "module" << std::setw(7) << "calls" << std::setw(14)
            << "prompt_tok" << std::setw(14) << "completion" << "latency_s\n";
        for (const auto& [module, cost] : report.mean_module_cost) {
            out << std::left << std::setw(12) << module << std::setw(7) << cost.calls
                << std::setw(14) << cost.prompt_tokens << std::setw(14) << cost.completion_tokens
                << fmt(cost.call_latency_seconds) << "\n";
        }
        for (const auto& [module, seconds] : report.mean_module_latency_seconds) {
            out << std::left << std::setw(12) << module << "wall latency " << fmt(seconds)
                << " s\n";
        }
    }
    return out.str();
}

std::string to_json(const MetricReport& report) {
    auto values_json = [](const MetricValues& values) {
        nlohmann::json j{{"hit1", values.hit1},
                         {"hit5", values.hit5},
                         {"hit10", values.hit10},
                         {"n_cases", values.n_cases},
                         {"n_excluded", values.n_excluded},
                         {"n_recall_skipped", values.n_recall_skipped}};
        if (values.recall) j["recall"] = *values.recall;
        return j;
    };

    nlohmann::json per_run = nlohmann::json::array();
    for (const auto& run : report.per_run) per_run.push_back(values_json(run));

    nlohmann::json partitions = nlohmann::json::array();
    for (const auto& partition : report.partitions) {
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& run : partition.per_run) runs.push_back(values_json(run));
        partitions.push_back({{"label", partition.label},
                              {"per_run", std::move(runs)},
                              {"mean", values_json(partition.mean)}});
    }

    nlohmann::json costs;
    for (const auto& [module, cost] : report.mean_module_cost) {
        costs[module] = {{"calls", cost.calls},
                         {"prompt_tokens", cost.prompt_tokens},
                         {"completion_tokens", cost.completion_tokens},
                         {"call_latency_seconds", cost.call_latency_seconds}};
    }

    nlohmann::json j{{"per_run", std::move(per_run)},
                     {"mean", values_json(report.mean)},
                     {"partitions", std::move(partitions)},
                     {"mean_module_cost", std::move(costs)},
                     {"mean_module_latency_seconds", report.mean_module_latency_seconds}};
    return j.dump(2);
}

} // namespace polydx
