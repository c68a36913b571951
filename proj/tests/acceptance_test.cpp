// Acceptance suite. Each criterion runs in isolation and prints one
// [PASS]/[FAIL]/[SKIP] line; the process exits non-zero when any criterion
// fails. Everything except the optional live smoke test runs offline against
// scripted gateways and recorded web fixtures.

#include "polydx/casedb.hpp"
#include "polydx/eval.hpp"
#include "polydx/pipeline.hpp"
#include "polydx/text.hpp"
#include "polydx/webagent.hpp"

#include "support/doubles.hpp"
#include "support/eval_fixture.hpp"
#include "support/oracles.hpp"
#include "support/golden_case.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>

namespace {

using namespace polydx;
using namespace polydx::testfix;

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Skipped {
    std::string reason;
};

void require(bool condition, const std::string& message) {
    if (!condition) throw CheckFailure(message);
}

int g_failures = 0;

void criterion(const char* name, double budget_seconds, const std::function<void()>& body) {
    auto started = std::chrono::steady_clock::now();
    try {
        body();
        auto elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (budget_seconds > 0.0 && elapsed > budget_seconds) {
            ++g_failures;
            std::printf("[FAIL] %-28s exceeded budget: %.2fs > %.2fs\n", name, elapsed,
                        budget_seconds);
            return;
        }
        std::printf("[PASS] %-28s (%.2fs)\n", name, elapsed);
    } catch (const Skipped& skip) {
        std::printf("[SKIP] %-28s %s\n", name, skip.reason.c_str());
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("[FAIL] %-28s %s\n", name, e.what());
    }
}

struct GoldenSetup {
    std::string dir;
    PipelineConfig config;

    GoldenSetup() {
        dir = make_temp_dir("polydx-accept");
        config.corpus_path = write_file(dir, "corpus.jsonl", golden_corpus_jsonl());
        config.web_fixtures_dir = dir + "/web";
        write_golden_web_fixtures(config.web_fixtures_dir);
    }
};

void require_names(const DiseaseList& list, const std::vector<std::string>& expected,
                   const std::string& label) {
    require(list.size() == expected.size(), label + ": expected " +
                                                std::to_string(expected.size()) + " items, got " +
                                                std::to_string(list.size()));
    for (std::size_t i = 0; i < expected.size(); ++i) {
        require(list.items[i].name == expected[i],
                label + " rank " + std::to_string(i + 1) + ": expected \"" + expected[i] +
                    "\", got \"" + list.items[i].name + "\"");
        require(list.items[i].rank == static_cast<int>(i) + 1, label + ": rank not contiguous");
    }
}

// ---------------------------------------------------------------------------

void golden_case_study_replay() {
    GoldenSetup setup;

    std::string first_json;
    for (int repeat = 0; repeat < 3; ++repeat) {
        Pipeline pipeline(setup.config, golden_client(), nullptr);
        auto outcome = pipeline.run_case(golden_case());

        require_names(outcome.bundle.soap.list, soap_list(), "soap");
        require_names(outcome.bundle.web.list, web_list(), "web");
        require_names(outcome.bundle.cases.list, case_list(), "case");
        require_names(outcome.bundle.trace.list, trace_list(), "trace");
        require_names(outcome.final.ranked, final_list(), "final");

        ExactNormalizedMatcher matcher;
        require(hit_at_k(outcome.final.ranked, kGoldDiagnosis, 1, matcher),
                "H@1 should be true for the golden case");

        auto json = to_json(outcome.final);
        if (repeat == 0) {
            first_json = json;
        } else {
            require(json == first_json, "final diagnosis differs across repeated runs");
        }
    }
}

void bm25_oracle_equivalence() {
    std::mt19937 rng(42);
    std::vector<std::vector<std::string>> docs;
    std::vector<std::string> doc_texts;
    for (int i = 0; i < 50; ++i) {
        docs.push_back(random_doc(rng, fixture_vocabulary(), 5, 30));
        doc_texts.push_back(join_tokens(docs.back()));
    }
    Bm25Index index(doc_texts);

    std::size_t mismatches = 0;
    for (int q = 0; q < 20; ++q) {
        auto query = random_doc(rng, fixture_vocabulary(), 1, 6);
        for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}}) {
            auto expected = oracle_topk(docs, query, k, 1.2, 0.75);
            auto actual = index.top_k(query, k);
            if (actual != expected) ++mismatches;
        }
    }
    require(mismatches == 0,
            "top-k disagreed with the exhaustive scorer in " + std::to_string(mismatches) +
                " of 60 retrievals");
}

void jaccard_oracle_equivalence() {
    // segmented fixture corpus with >= 40 segments
    std::vector<std::string> vocabulary{"fever",    "cough",  "rash",   "nausea", "edema",
                                        "weakness", "tremor", "sepsis", "lesion", "stroke"};
    std::vector<CorpusInstance> corpus;
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> steps(3, 5);
    std::uniform_int_distribution<std::size_t> pick(0, vocabulary.size() - 1);
    for (int i = 0; i < 12; ++i) {
        int n = steps(rng);
        std::string reasoning;
        for (int j = 0; j < n; ++j) {
            reasoning += std::to_string(j + 1) + ". The finding of " + vocabulary[pick(rng)] +
                         " with " + vocabulary[pick(rng)] + " was considered. ";
        }
        corpus.push_back({"case about " + vocabulary[pick(rng)], reasoning,
                          "diagnosis " + std::to_string(i), corpus.size()});
    }
    auto extractor = std::make_shared<LexiconExtractor>(vocabulary);
    CaseDatabase database(corpus, extractor);
    require(database.segments().size() >= 40, "fixture needs at least 40 segments, got " +
                                                  std::to_string(database.segments().size()));

    CaseReport report{"q", "presenting with fever, weakness and a lesion after a stroke", {}, {}};
    auto query_entities = extractor->extract(report.text);

    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}}) {
        std::vector<std::tuple<double, std::size_t, std::size_t>> scored;
        for (const auto& segment : database.segments()) {
            double sim = jaccard(query_entities, segment.entities);
            if (sim > 0.0) scored.emplace_back(sim, segment.instance_index, segment.step_index);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
            return std::get<2>(a) < std::get<2>(b);
        });

        auto actual = database.topk_traces(report, k);
        require(actual.size() == std::min(k, scored.size()), "topk_traces size mismatch");
        for (std::size_t i = 0; i < actual.size(); ++i) {
            require(actual[i].instance_index == std::get<1>(scored[i]) &&
                        actual[i].step_index == std::get<2>(scored[i]),
                    "topk_traces order mismatch at position " + std::to_string(i));
        }
    }

    // jaccard properties over 1000 random pairs
    std::uniform_int_distribution<int> size_dist(0, 12);
    std::uniform_int_distribution<int> element(0, 19);
    auto random_set = [&] {
        EntitySet set;
        int n = size_dist(rng);
        for (int i = 0; i < n; ++i) set.insert("e" + std::to_string(element(rng)));
        return set;
    };
    for (int i = 0; i < 1000; ++i) {
        auto a = random_set();
        auto b = random_set();
        double sim = jaccard(a, b);
        require(sim == jaccard(b, a), "jaccard is not symmetric");
        require(sim >= 0.0 && sim <= 1.0, "jaccard out of bounds");
        if (a.empty() && b.empty()) {
            require(sim == 0.0, "empty/empty must be 0");
        } else {
            require((sim == 1.0) == (a == b), "jaccard == 1 must hold iff nonempty sets equal");
        }
    }
}

void voting_order_correctness() {
    SynonymTable synonyms;
    std::mt19937 rng(2024);
    std::size_t mismatches = 0;
    for (int i = 0; i < 200; ++i) {
        auto bundle = random_bundle(rng);
        auto expected = oracle_vote(bundle, synonyms, 10);
        auto actual = simple_vote(bundle, synonyms, 10);
        if (actual.size() != expected.size()) {
            ++mismatches;
            continue;
        }
        for (std::size_t j = 0; j < expected.size(); ++j) {
            if (actual.items[j].name != expected[j]) {
                ++mismatches;
                break;
            }
        }
    }
    require(mismatches == 0, std::to_string(mismatches) + " of 200 bundles disagreed with the "
                                                          "brute-force ordering");

    auto golden_case = make_bundle(soap_list(), web_list(), case_list(), trace_list());
    auto vote = simple_vote(golden_case, synonyms, 10);
    require(!vote.empty() && normalize_disease_name(vote.items[0].name) ==
                                 normalize_disease_name(kGoldDiagnosis),
            "the support-4 candidate is not ranked first on the golden bundle");
}

void metric_correctness() {
    // window monotonicity over 500 random fixtures
    std::mt19937 rng(31);
    const std::vector<std::string> vocabulary{"Pneumonia", "Influenza", "Sepsis", "Gout",
                                              "Stroke",    "Lupus",     "Measles", "Mumps",
                                              "Polio",     "Rabies",    "Tetanus", "Cholera"};
    std::uniform_int_distribution<std::size_t> len(0, 12);
    std::uniform_int_distribution<std::size_t> pick(0, vocabulary.size() - 1);
    ExactNormalizedMatcher matcher;
    for (int i = 0; i < 500; ++i) {
        std::vector<std::string> names;
        auto n = len(rng);
        for (std::size_t j = 0; j < n; ++j) names.push_back(vocabulary[pick(rng)]);
        auto list = make_list(Source::Final, names);
        auto gold = vocabulary[pick(rng)];
        bool h1 = hit_at_k(list, gold, 1, matcher);
        bool h5 = hit_at_k(list, gold, 5, matcher);
        bool h10 = hit_at_k(list, gold, 10, matcher);
        require(!h1 || h5, "H@1 implies H@5");
        require(!h5 || h10, "H@5 implies H@10");
    }

    // reasoning recall against hand-computed fractions on 10 fixtures
    for (int total = 1; total <= 10; ++total) {
        std::string gold;
        for (int s = 1; s <= total; ++s) {
            gold += std::to_string(s) + ". Differential item s" + std::to_string(s) +
                    " was weighed. ";
        }
        ScriptedStepJudge judge;
        int affirmed = total / 2;
        for (int s = 1; s <= affirmed; ++s) {
            judge.verdicts.push_back({"item s" + std::to_string(s) + " was weighed", true});
        }
        auto recall = reasoning_recall("predicted reasoning", gold, judge);
        require(recall.has_value(), "recall unexpectedly skipped");
        double expected = static_cast<double>(affirmed) / static_cast<double>(total);
        require(std::abs(*recall - expected) < 1e-12,
                "recall mismatch on fixture with " + std::to_string(total) + " steps");
    }

    // a 2-case, 3-run scripted evaluation reproduces the hand-computed report
    EvalFixture fixture;
    EvalHarness harness(*fixture.pipeline, std::make_shared<ExactNormalizedMatcher>(),
                        fixture.judge());
    EvalOptions options;
    options.runs = 3;
    options.parallelism = 1;
    auto report = harness.run_evaluation(fixture.cases, options);

    require(report.per_run.size() == 3, "expected three per-run rows");
    const double expected_h1[] = {1.0, 0.5, 0.5};
    for (int run = 0; run < 3; ++run) {
        require(std::abs(report.per_run[run].hit1 - expected_h1[run]) < 1e-12,
                "per-run H@1 mismatch on run " + std::to_string(run + 1));
        require(std::abs(report.per_run[run].hit5 - 1.0) < 1e-12, "per-run H@5 mismatch");
        require(report.per_run[run].recall.has_value() &&
                    std::abs(*report.per_run[run].recall - 0.75) < 1e-12,
                "per-run recall mismatch");
        require(report.per_run[run].n_cases == 2 && report.per_run[run].n_excluded == 0,
                "per-run case accounting mismatch");
    }
    require(std::abs(report.mean.hit1 - 2.0 / 3.0) < 1e-12, "mean H@1 is not 2/3");
    require(std::abs(report.mean.hit10 - 1.0) < 1e-12, "mean H@10 is not 1.0");
    require(report.mean.recall.has_value() && std::abs(*report.mean.recall - 0.75) < 1e-12,
            "mean recall is not 0.75");
}

void blocklist_enforcement() {
    auto client = std::make_shared<ScriptedMockClient>();
    client->on("Produce a short retrieval plan",
               R"({"queries": ["https://pubmed.ncbi.nlm.nih.gov/31722/",
                               "https://huggingface.co/datasets/cases",
                               "https://www.pubmed.ncbi.nlm.nih.gov/55/",
                               "https://reference.test/safe"],
                   "tools": ["navigate", "navigate", "navigate", "navigate"], "steps": 4})");
    client->on("safe page content", "memory: safe content");
    client->on("WEB RESEARCH EVIDENCE", "<think>done</think>\n1. Pneumonia\n");

    auto backend = std::make_shared<ScriptedWebBackend>();
    backend->pages["https://reference.test/safe"] = "safe page content";

    LlmGateway gateway(client);
    PromptCatalog prompts;
    WebResearchAgent agent(gateway, prompts, backend, Blocklist{}, CompletionRequest{},
                           AgentOptions{});

    RunRecorder recorder("blocklist");
    (void)agent.run(golden_case(), &recorder);
    auto record = recorder.snapshot();

    require(record.tool_log.size() == 4, "expected 4 tool invocations");
    Blocklist blocklist;
    std::size_t blocked_count = 0;
    for (const auto& invocation : record.tool_log) {
        if (blocklist.blocked_url(invocation.url)) {
            require(invocation.blocked, "blocklisted URL was not flagged: " + invocation.url);
            require(invocation.result.empty(), "blocked invocation has a result");
            ++blocked_count;
        }
    }
    require(blocked_count == 3, "expected 3 blocked invocations");
    require(backend->navigate_calls.load() == 1,
            "backend saw " + std::to_string(backend->navigate_calls.load()) +
                " navigations; blocked hosts must never reach the network");
    require(backend->total_calls() == 1, "backend saw calls beyond the single safe navigation");
}

void stage1_parallelism() {
    GoldenSetup setup;
    setup.config.strategy = Strategy::Vote; // stage 2 stays off the gateway

    for (int trial = 0; trial < 5; ++trial) {
        auto client = std::make_shared<ScriptedMockClient>();
        for (auto& entry : golden_script()) {
            // 100 ms on each source's list-producing call, 0 elsewhere
            if (entry.pattern == "CASE PRESENTATION (SOAP)" ||
                entry.pattern == "WEB RESEARCH EVIDENCE" ||
                entry.pattern == "Here are some reasoning examples:" ||
                entry.pattern == "Some possible disease-related symptoms are listed") {
                entry.delay_ms = 100;
            }
            client->add(std::move(entry));
        }
        Pipeline pipeline(setup.config, client, nullptr);

        auto started = std::chrono::steady_clock::now();
        auto outcome = pipeline.run_case(golden_case());
        auto elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        require(outcome.bundle.non_empty_sources() == 4, "a source failed during the trial");
        require(elapsed < 0.250, "trial " + std::to_string(trial + 1) +
                                     " stage-1 wall clock was " + std::to_string(elapsed) +
                                     "s (sequential bound is 0.4s)");
    }
}

void degradation_totality() {
    GoldenSetup setup;
    setup.config.strategy = Strategy::Vote;

    const std::vector<std::pair<Source, std::string>> patterns{
        {Source::Soap, "CASE PRESENTATION (SOAP)"},
        {Source::Web, "WEB RESEARCH EVIDENCE"},
        {Source::Case, "Here are some reasoning examples:"},
        {Source::Trace, "Some possible disease-related symptoms are listed"},
    };

    for (int mask = 1; mask <= 15; ++mask) {
        auto client = std::make_shared<ScriptedMockClient>();
        std::set<Source> failing;
        for (int bit = 0; bit < 4; ++bit) {
            if (mask & (1 << bit)) failing.insert(patterns[bit].first);
        }
        for (auto& entry : golden_script()) {
            for (int bit = 0; bit < 4; ++bit) {
                if ((mask & (1 << bit)) && entry.pattern == patterns[bit].second) {
                    entry.completion = "<think>inconclusive</think>"; // no parsable list
                }
            }
            client->add(std::move(entry));
        }
        Pipeline pipeline(setup.config, client, nullptr);

        if (mask == 15) {
            bool threw = false;
            try {
                pipeline.run_case(golden_case());
            } catch (const PipelineError&) {
                threw = true;
            }
            require(threw, "all-fail subset must abort the case");
            continue;
        }

        auto outcome = pipeline.run_case(golden_case());
        for (auto source : EvidenceBundle::source_order()) {
            const auto& slot = outcome.bundle.by_source(source);
            if (failing.count(source)) {
                require(slot.failed(), std::string(to_string(source)) +
                                           " should carry a failure note (mask " +
                                           std::to_string(mask) + ")");
                require(slot.list.empty(), "failed source must have an empty list");
            } else {
                require(!slot.failed(), std::string(to_string(source)) +
                                            " unexpectedly failed (mask " +
                                            std::to_string(mask) + ")");
            }
        }
        require(!outcome.final.ranked.empty(), "vote over surviving sources must be non-empty");
    }
}

void live_smoke() {
    const char* api_key = std::getenv("POLYDX_API_KEY");
    const char* endpoint = std::getenv("POLYDX_LIVE_ENDPOINT");
    const char* model = std::getenv("POLYDX_LIVE_MODEL");
    const char* case_set = std::getenv("POLYDX_LIVE_SET");
    const char* corpus = std::getenv("POLYDX_LIVE_CORPUS");
    if (!api_key || !endpoint || !model || !case_set || !corpus) {
        throw Skipped{"no provider credential configured (POLYDX_API_KEY, POLYDX_LIVE_ENDPOINT, "
                      "POLYDX_LIVE_MODEL, POLYDX_LIVE_SET, POLYDX_LIVE_CORPUS)"};
    }

    auto cases = load_case_set(case_set);
    if (cases.size() > 20) cases.resize(20);

    PipelineConfig config;
    config.provider.endpoint = endpoint;
    config.provider.model = model;
    config.provider.api_key = api_key;
    config.corpus_path = corpus;
    config.sources = {Source::Soap, Source::Case, Source::Trace};
    if (const char* search = std::getenv("POLYDX_SEARCH_ENDPOINT")) {
        config.sources.insert(Source::Web);
        config.web_backend = "live";
        config.live_web.search_endpoint = search;
    }

    Pipeline pipeline(config);
    CompletionRequest judge_base;
    judge_base.model_id = model;
    auto matcher = std::make_shared<JudgeMatcher>(pipeline.gateway(), pipeline.prompts(),
                                                  judge_base);
    EvalHarness harness(pipeline, matcher, nullptr);

    EvalOptions options;
    options.runs = 1;
    options.compute_recall = false;
    auto full = harness.run_evaluation(cases, options);

    pipeline.set_sources({Source::Soap});
    auto soap_only = harness.run_evaluation(cases, options);

    std::printf("       live-smoke: full H@5 %.3f vs soap-only H@5 %.3f over %zu cases\n",
                full.mean.hit5, soap_only.mean.hit5, cases.size());
    require(full.mean.hit5 >= soap_only.mean.hit5,
            "full pipeline H@5 fell below the soap-only variant");
}

} // namespace

int main() {
    std::printf("acceptance criteria\n");
    criterion("golden-case-study-replay", 5.0, golden_case_study_replay);
    criterion("bm25-oracle-equivalence", 2.0, bm25_oracle_equivalence);
    criterion("jaccard-oracle-equivalence", 5.0, jaccard_oracle_equivalence);
    criterion("voting-order-correctness", 0.0, voting_order_correctness);
    criterion("metric-correctness", 0.0, metric_correctness);
    criterion("blocklist-enforcement", 0.0, blocklist_enforcement);
    criterion("stage1-parallelism", 0.0, stage1_parallelism);
    criterion("degradation-totality", 0.0, degradation_totality);
    criterion("live-smoke", 0.0, live_smoke);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
