#include "polydx/pipeline.hpp"

#include "polydx/errors.hpp"
#include "polydx/text.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

namespace polydx {
namespace {

std::string safe_filename(const std::string& id) {
    std::string out;
    for (char c : id) {
        out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '-';
    }
    return out.empty() ? "case" : out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

} // namespace

RunStore::RunStore(std::string root_dir, std::string run_id)
    : root_(std::move(root_dir)), run_id_(std::move(run_id)) {
    std::filesystem::create_directories(run_dir());
}

std::string RunStore::run_dir() const {
    return (std::filesystem::path(root_) / run_id_).string();
}

std::string RunStore::record_path(const std::string& case_id) const {
    return (std::filesystem::path(run_dir()) / (safe_filename(case_id) + ".record.json")).string();
}

std::string RunStore::final_path(const std::string& case_id) const {
    return (std::filesystem::path(run_dir()) / (safe_filename(case_id) + ".final.json")).string();
}

std::string RunStore::bundle_path(const std::string& case_id) const {
    return (std::filesystem::path(run_dir()) / (safe_filename(case_id) + ".bundle.json")).string();
}

void RunStore::save(const CaseOutcome& outcome) {
    write_file(record_path(outcome.case_id), to_json(outcome.record));
    write_file(final_path(outcome.case_id), to_json(outcome.final));
    write_file(bundle_path(outcome.case_id), to_json(outcome.bundle));
}

void RunStore::write_manifest(const std::vector<std::string>& case_ids,
                              const std::string& config_note) {
    nlohmann::json j{{"run_id", run_id_}, {"cases", case_ids}, {"config", config_note}};
    write_file((std::filesystem::path(run_dir()) / "manifest.json").string(), j.dump(2));
}

RunRecord RunStore::load_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open record file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return run_record_from_json(buffer.str());
}

std::vector<CaseReport> load_case_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open case set: " + path);

    std::vector<CaseReport> cases;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("invalid case record: ") + e.what(), line_number);
        }
        if (!j.contains("case")) throw FormatError("case record needs a 'case' field", line_number);
        CaseReport report;
        report.id = j.value("id", "case-" + std::to_string(line_number));
        report.text = j["case"].get<std::string>();
        report.gold_reasoning = j.value("reasoning", std::string{});
        report.gold_diagnosis = j.value("diagnosis", std::string{});
        if (report.text.empty()) throw FormatError("case text is empty", line_number);
        cases.push_back(std::move(report));
    }
    return cases;
}

Pipeline::Pipeline(PipelineConfig config) : Pipeline(std::move(config), nullptr, nullptr) {}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<CompletionClient> client,
                   std::shared_ptr<WebToolBackend> web_backend)
    : config_(std::move(config)) {
    validate(config_);

    if (!config_.prompts_dir.empty()) prompts_.load_overrides(config_.prompts_dir);

    if (!client) {
        if (config_.gateway_kind == "mock") {
            client = ScriptedMockClient::load(config_.mock_script);
        } else {
            client = std::make_shared<HttpCompletionClient>(config_.provider);
        }
    }
    gateway_ = std::make_shared<LlmGateway>(std::move(client), config_.gateway);

    if (!web_backend && config_.sources.count(Source::Web)) {
        if (config_.web_backend == "recorded") {
            if (config_.web_fixtures_dir.empty()) {
                throw ConfigError("web.backend = recorded requires web.fixtures");
            }
            web_backend = std::make_shared<RecordedWebBackend>(config_.web_fixtures_dir);
        } else {
            web_backend = std::make_shared<LiveWebBackend>(config_.live_web);
        }
    }
    web_backend_ = std::move(web_backend);

    auto lexicon = std::make_shared<LexiconExtractor>();
    if (!config_.lexicon_path.empty()) lexicon->load_file(config_.lexicon_path);
    if (config_.extractor == "remote") {
        extractor_ = std::make_shared<RemoteNerExtractor>(
            config_.ner_endpoint, config_.ner_fallback_to_lexicon ? lexicon : nullptr);
    } else {
        extractor_ = lexicon;
    }

    bool needs_corpus = config_.sources.count(Source::Case) || config_.sources.count(Source::Trace);
    if (needs_corpus) {
        case_db_ = std::make_shared<CaseDatabase>(load_corpus(config_.corpus_path), extractor_);
    }

    CompletionRequest base;
    base.temperature = config_.temperature;
    base.max_output_tokens = config_.max_output_tokens;
    base.model_id = config_.provider.model;

    soap_ = std::make_unique<SoapStructurer>(*gateway_, prompts_, base);
    case_diagnoser_ =
        std::make_unique<CaseDiagnoser>(*gateway_, prompts_, base, config_.prompt_budget_chars);

    SynonymTable synonyms;
    if (!config_.synonyms_path.empty()) synonyms.load_file(config_.synonyms_path);
    integrator_ = std::make_unique<EvidenceIntegrator>(*gateway_, prompts_, std::move(synonyms),
                                                       base, config_.output_len);
}

const SynonymTable& Pipeline::synonyms() const { return integrator_->synonyms(); }

void Pipeline::set_sources(std::set<Source> sources) {
    if (sources.empty()) throw ConfigError("sources must not be empty");
    bool needs_corpus = sources.count(Source::Case) || sources.count(Source::Trace);
    if (needs_corpus && !case_db_) throw ConfigError("case/trace sources require a corpus");
    if (sources.count(Source::Web) && !web_backend_) {
        throw ConfigError("web source requires a web backend");
    }
    config_.sources = std::move(sources);
}

SourceResult Pipeline::run_source(Source source, const CaseReport& report, RunRecorder& recorder) {
    auto started = std::chrono::steady_clock::now();
    SourceResult result;
    switch (source) {
    case Source::Soap:
        result = soap_->run(report, config_.soap_bypass, &recorder);
        break;
    case Source::Web: {
        CompletionRequest base;
        base.temperature = config_.temperature;
        base.max_output_tokens = config_.max_output_tokens;
        base.model_id = config_.provider.model;
        WebResearchAgent agent(*gateway_, prompts_, web_backend_,
                               Blocklist(config_.extra_blocked_hosts), base, config_.agent);
        result = agent.run(report, &recorder);
        break;
    }
    case Source::Case:
        result = case_diagnoser_->diagnose_with_cases(
            report, case_db_->topk_cases(report, config_.k_cases), &recorder);
        break;
    case Source::Trace:
        result = case_diagnoser_->diagnose_with_traces(
            report, case_db_->topk_traces(report, config_.k_traces), &recorder);
        break;
    default:
        throw ConfigError("cannot run source 'final'");
    }
    recorder.add_module_latency(
        to_string(source),
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    return result;
}

CaseOutcome Pipeline::run_case(const CaseReport& report) {
    if (report.text.empty()) throw ConfigError("case text must not be empty: " + report.id);

    RunRecorder recorder(report.id);
    EvidenceBundle bundle;
    for (auto source : EvidenceBundle::source_order()) {
        auto& slot = bundle.by_source(source);
        slot.list.source = source;
        if (!config_.sources.count(source)) slot.failure = "disabled";
    }

    auto stage1_started = std::chrono::steady_clock::now();
    std::vector<std::pair<Source, std::future<SourceResult>>> tasks;
    for (auto source : EvidenceBundle::source_order()) {
        if (!config_.sources.count(source)) continue;
        tasks.emplace_back(source, std::async(std::launch::async, [this, source, &report,
                                                                   &recorder] {
            return run_source(source, report, recorder);
        }));
    }

    std::size_t failures = 0;
    std::vector<std::string> causes;
    for (auto& [source, future] : tasks) {
        auto& slot = bundle.by_source(source);
        try {
            slot = future.get();
            slot.list.source = source;
        } catch (const std::exception& e) {
            slot = SourceResult{};
            slot.list.source = source;
            slot.failure = e.what();
            recorder.add_note(std::string("source ") + to_string(source) + " failed: " + e.what());
            ++failures;
            causes.push_back(std::string(to_string(source)) + ": " + e.what());
        }
    }
    recorder.add_module_latency(
        "stage1",
        std::chrono::duration<double>(std::chrono::steady_clock::now() - stage1_started).count());

    if (failures == tasks.size()) {
        std::string detail;
        for (const auto& cause : causes) {
            if (!detail.empty()) detail += "; ";
            detail += cause;
        }
        throw PipelineError("every enabled source failed for case " + report.id + ": " + detail);
    }

    auto stage2_started = std::chrono::steady_clock::now();
    FinalDiagnosis final;
    if (tasks.size() == 1) {
        // Single-source run: the lone list is the final list, Stage 2 is
        // bypassed.
        const auto& only = bundle.by_source(tasks.front().first);
        final.strategy = "bypass";
        final.reasoning = only.reasoning.empty() ? "(single-source run)" : only.reasoning;
        final.ranked = only.list;
        final.ranked.source = Source::Final;
        if (final.ranked.items.size() > config_.output_len) {
            final.ranked.items.resize(config_.output_len);
        }
    } else {
        final = integrator_->integrate(report, bundle, config_.strategy, &recorder);
    }
    recorder.add_module_latency(
        "stage2",
        std::chrono::duration<double>(std::chrono::steady_clock::now() - stage2_started).count());

    CaseOutcome outcome;
    outcome.case_id = report.id;
    outcome.final = std::move(final);
    outcome.bundle = std::move(bundle);
    outcome.record = recorder.snapshot();
    if (store_) store_->save(outcome);
    return outcome;
}

} // namespace polydx
