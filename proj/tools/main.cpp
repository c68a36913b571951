#include "polydx/casedb.hpp"
#include "polydx/config.hpp"
#include "polydx/errors.hpp"
#include "polydx/eval.hpp"
#include "polydx/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace polydx;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// --set key=value overrides, applied on top of the config file
PipelineConfig load_config_with(const std::string& path,
                                const std::vector<std::string>& overrides) {
    auto config = load_config(path);
    for (const auto& entry : overrides) {
        auto eq = entry.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + entry);
        auto key = entry.substr(0, eq);
        auto value = entry.substr(eq + 1);
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        apply_config_entry(config, strip(key), strip(value));
    }
    validate(config);
    return config;
}

std::string default_run_id() {
    auto now = std::chrono::system_clock::now();
    auto time = std::chrono::system_clock::to_time_t(now);
    char formatted[32];
    std::strftime(formatted, sizeof(formatted), "%Y%m%d-%H%M%S", std::localtime(&time));
    return formatted;
}

CaseReport load_single_case(const std::string& path, const std::string& id,
                            const std::string& gold) {
    // a JSONL record file or a plain-text narrative
    auto content = read_file(path);
    auto first_line_end = content.find('\n');
    auto first_line = content.substr(0, first_line_end);
    if (!first_line.empty() && first_line.front() == '{') {
        auto cases = load_case_set(path);
        if (cases.empty()) throw FormatError("case file has no records", 0);
        auto report = cases.front();
        if (!id.empty()) report.id = id;
        if (!gold.empty()) report.gold_diagnosis = gold;
        return report;
    }
    CaseReport report;
    report.id = id.empty() ? "case" : id;
    report.text = content;
    report.gold_diagnosis = gold;
    return report;
}

std::shared_ptr<DiagnosisMatcher> make_matcher(Pipeline& pipeline) {
    const auto& config = pipeline.config();
    if (config.matcher == "exact") return std::make_shared<ExactNormalizedMatcher>();
    CompletionRequest base;
    base.temperature = config.temperature;
    base.max_output_tokens = config.max_output_tokens;
    base.model_id = config.provider.model;
    return std::make_shared<JudgeMatcher>(pipeline.gateway(), pipeline.prompts(), base);
}

std::shared_ptr<StepJudge> make_judge(Pipeline& pipeline) {
    const auto& config = pipeline.config();
    if (!config.eval_recall) return nullptr;
    CompletionRequest base;
    base.temperature = config.temperature;
    base.max_output_tokens = config.max_output_tokens;
    base.model_id = config.provider.model;
    return std::make_shared<LlmStepJudge>(pipeline.gateway(), pipeline.prompts(), base);
}

void print_final(const FinalDiagnosis& final) {
    std::cout << "strategy: " << final.strategy << (final.degraded ? " (degraded)" : "") << "\n";
    for (const auto& item : final.ranked.items) {
        std::cout << "  " << item.rank << ". " << item.name;
        if (!item.evidence.empty()) std::cout << " - " << item.evidence;
        std::cout << "\n";
    }
}

int cmd_ingest(const std::string& corpus_path, const std::string& lexicon_path,
               const std::string& output_path) {
    auto corpus = load_corpus(corpus_path);

    auto extractor = std::make_shared<LexiconExtractor>();
    if (!lexicon_path.empty()) extractor->load_file(lexicon_path);
    CaseDatabase database(corpus, extractor);

    std::size_t entity_count = 0;
    for (const auto& segment : database.segments()) entity_count += segment.entities.size();

    std::cout << "documents:            " << database.corpus().size() << "\n"
              << "average doc length:   " << database.index().average_doc_length() << " tokens\n"
              << "trace segments:       " << database.segments().size() << "\n"
              << "entities per segment: "
              << (database.segments().empty()
                      ? 0.0
                      : static_cast<double>(entity_count) / database.segments().size())
              << "\n";

    if (!output_path.empty()) {
        std::ofstream out(output_path, std::ios::binary);
        if (!out) throw IoError("cannot write " + output_path);
        for (const auto& instance : database.corpus()) {
            nlohmann::json j{{"case", instance.case_text},
                             {"reasoning", instance.reasoning},
                             {"diagnosis", instance.diagnosis}};
            out << j.dump() << "\n";
        }
        nlohmann::json stats{{"documents", database.corpus().size()},
                             {"average_doc_length", database.index().average_doc_length()},
                             {"segments", database.segments().size()},
                             {"bm25", {{"k1", database.index().params().k1},
                                       {"b", database.index().params().b}}}};
        std::ofstream stats_out(output_path + ".stats.json", std::ios::binary);
        stats_out << stats.dump(2) << "\n";
        std::cout << "wrote " << output_path << " and " << output_path << ".stats.json\n";
    }
    return 0;
}

int cmd_run_case(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& case_path, const std::string& text, const std::string& id,
                 const std::string& gold, std::string run_id) {
    auto config = load_config_with(config_path, overrides);
    Pipeline pipeline(config);

    if (run_id.empty()) run_id = default_run_id();
    auto store = std::make_shared<RunStore>(config.output_dir, run_id);
    pipeline.set_store(store);

    CaseReport report = case_path.empty()
                            ? CaseReport{id.empty() ? "case" : id, text, {}, gold}
                            : load_single_case(case_path, id, gold);

    auto outcome = pipeline.run_case(report);
    store->write_manifest({outcome.case_id}, config_path);

    print_final(outcome.final);
    if (!report.gold_diagnosis.empty()) {
        auto matcher = make_matcher(pipeline);
        std::cout << "H@1: "
                  << (hit_at_k(outcome.final.ranked, report.gold_diagnosis, 1, *matcher) ? "yes"
                                                                                         : "no")
                  << "\n";
    }
    std::cout << "final:  " << store->final_path(outcome.case_id) << "\n"
              << "record: " << store->record_path(outcome.case_id) << "\n";
    return 0;
}

int cmd_run_eval(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& set_path, std::size_t runs, bool split,
                 const std::string& json_path) {
    auto config = load_config_with(config_path, overrides);
    Pipeline pipeline(config);
    auto cases = load_case_set(set_path);

    EvalHarness harness(pipeline, make_matcher(pipeline), make_judge(pipeline));
    EvalOptions options;
    options.runs = runs;
    options.compute_recall = config.eval_recall;
    options.batched_recall = config.batched_recall_judging;
    options.split_seen_unseen = split;
    options.parallelism = config.eval_parallelism;

    auto report = harness.run_evaluation(cases, options);
    std::cout << format_report(report);
    if (!json_path.empty()) {
        std::ofstream out(json_path, std::ios::binary);
        if (!out) throw IoError("cannot write " + json_path);
        out << to_json(report) << "\n";
        std::cout << "wrote " << json_path << "\n";
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& set_path, const std::string& variants_spec, std::size_t runs) {
    auto config = load_config_with(config_path, overrides);
    Pipeline pipeline(config);
    auto cases = load_case_set(set_path);

    EvalHarness harness(pipeline, make_matcher(pipeline), make_judge(pipeline));
    EvalOptions options;
    options.runs = runs;
    options.compute_recall = config.eval_recall;
    options.batched_recall = config.batched_recall_judging;
    options.parallelism = config.eval_parallelism;

    auto reports = harness.run_ablation(cases, parse_variants(variants_spec), options);
    for (const auto& [name, report] : reports) {
        std::cout << "== " << name << " ==\n" << format_report(report) << "\n";
    }
    return 0;
}

int cmd_show_record(const std::string& record_path, bool full) {
    auto record = RunStore::load_record(record_path);

    std::cout << "case: " << record.case_id << "\n";
    for (const auto& [module, seconds] : record.module_latency_seconds) {
        std::cout << "  latency " << module << ": " << seconds << " s\n";
    }
    std::cout << "tokens: " << record.total_prompt_tokens() << " prompt / "
              << record.total_completion_tokens() << " completion\n";

    if (!record.tool_log.empty()) {
        std::cout << "tool log:\n";
        for (const auto& invocation : record.tool_log) {
            std::cout << "  step " << invocation.step << " " << invocation.tool << "(\""
                      << invocation.argument << "\")";
            if (invocation.blocked) std::cout << " BLOCKED";
            if (invocation.failed) std::cout << " FAILED: " << invocation.error;
            std::cout << "\n";
            if (full && !invocation.result.empty()) {
                std::cout << "    " << invocation.result << "\n";
            }
        }
    }

    std::cout << "calls:\n";
    auto clip = [full](const std::string& text) {
        if (full || text.size() <= 200) return text;
        return text.substr(0, 200) + "...";
    };
    for (const auto& call : record.calls) {
        std::cout << "  [" << call.module << "] " << call.prompt_tokens << "+"
                  << call.completion_tokens << " tokens, " << call.latency_seconds << " s\n"
                  << "    prompt: " << clip(call.prompt) << "\n"
                  << "    completion: " << clip(call.completion) << "\n";
    }

    if (!record.notes.empty()) {
        std::cout << "notes:\n";
        for (const auto& note : record.notes) std::cout << "  - " << note << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-source diagnostic reasoning pipeline"};
    app.require_subcommand(1);

    // ingest
    std::string corpus_path, lexicon_path, output_path;
    auto* ingest = app.add_subcommand("ingest", "validate a corpus and build its index");
    ingest->add_option("--corpus", corpus_path, "corpus JSONL file")->required();
    ingest->add_option("--lexicon", lexicon_path, "extra lexicon terms, one per line");
    ingest->add_option("--output", output_path, "write the normalized corpus snapshot here");

    // run-case
    std::string config_path, case_path, case_text, case_id, gold, run_id;
    std::vector<std::string> overrides;
    auto* run_case = app.add_subcommand("run-case", "run the pipeline on one case");
    run_case->add_option("--config", config_path, "pipeline config file")->required();
    run_case->add_option("--opt", overrides, "override a config entry (key=value, repeatable)");
    run_case->add_option("--case", case_path, "case file (JSONL record or plain text)");
    run_case->add_option("--text", case_text, "case narrative given inline");
    run_case->add_option("--id", case_id, "case identifier");
    run_case->add_option("--gold", gold, "gold diagnosis for an immediate H@1 check");
    run_case->add_option("--run-id", run_id, "run directory name (default: timestamp)");

    // run-eval
    std::string set_path, json_path;
    std::size_t runs = 1;
    bool split = false;
    auto* run_eval = app.add_subcommand("run-eval", "evaluate the pipeline over a case set");
    run_eval->add_option("--config", config_path, "pipeline config file")->required();
    run_eval->add_option("--set", set_path, "evaluation set (JSONL)")->required();
    run_eval->add_option("--opt", overrides, "override a config entry (key=value, repeatable)");
    run_eval->add_option("--runs", runs, "repeated runs to average over");
    run_eval->add_flag("--split", split, "report seen/unseen partitions");
    run_eval->add_option("--json", json_path, "also write the report as JSON");

    // ablate
    std::string variants_spec;
    auto* ablate = app.add_subcommand("ablate", "run source/strategy variants");
    ablate->add_option("--config", config_path, "pipeline config file")->required();
    ablate->add_option("--set", set_path, "evaluation set (JSONL)")->required();
    ablate->add_option("--opt", overrides, "override a config entry (key=value, repeatable)");
    ablate->add_option("--variants", variants_spec,
                       "comma list of soap|web|case|trace|vote|differential")
        ->required();
    ablate->add_option("--runs", runs, "repeated runs to average over");

    // show-record
    std::string record_path;
    bool full = false;
    auto* show = app.add_subcommand("show-record", "pretty-print a persisted run record");
    show->add_option("--record", record_path, "record JSON file")->required();
    show->add_flag("--full", full, "print prompts, completions and tool results verbatim");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage errors exit 1, help exits 0
    }

    try {
        if (*ingest) return cmd_ingest(corpus_path, lexicon_path, output_path);
        if (*run_case) {
            if (case_path.empty() && case_text.empty()) {
                std::cerr << "run-case needs --case or --text\n";
                return 1;
            }
            return cmd_run_case(config_path, overrides, case_path, case_text, case_id, gold,
                                run_id);
        }
        if (*run_eval) {
            return cmd_run_eval(config_path, overrides, set_path, runs, split, json_path);
        }
        if (*ablate) return cmd_ablate(config_path, overrides, set_path, variants_spec, runs);
        if (*show) return cmd_show_record(record_path, full);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
