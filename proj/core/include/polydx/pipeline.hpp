#pragma once

#include "polydx/casedb.hpp"
#include "polydx/config.hpp"
#include "polydx/gateway.hpp"
#include "polydx/integrator.hpp"
#include "polydx/prompts.hpp"
#include "polydx/record.hpp"
#include "polydx/soap.hpp"
#include "polydx/types.hpp"
#include "polydx/webagent.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace polydx {

/// Everything produced by one pipeline execution for one case.
struct CaseOutcome {
    std::string case_id;
    FinalDiagnosis final;
    EvidenceBundle bundle;
    RunRecord record;
};

/// Persists run artifacts: one directory per run, one record and one final
/// file per case, plus a manifest.
class RunStore {
public:
    RunStore(std::string root_dir, std::string run_id);

    void save(const CaseOutcome& outcome);
    void write_manifest(const std::vector<std::string>& case_ids, const std::string& config_note);

    std::string run_dir() const;
    std::string record_path(const std::string& case_id) const;
    std::string final_path(const std::string& case_id) const;
    std::string bundle_path(const std::string& case_id) const;

    static RunRecord load_record(const std::string& path);

private:
    std::string root_;
    std::string run_id_;
};

/// The orchestrator: owns the gateway, prompt catalog, case database, and
/// per-source components; fans Stage-1 out in parallel and fans back in for
/// Stage 2.
class Pipeline {
public:
    /// Builds everything from config (loads corpus, lexicon, synonyms,
    /// mock scripts, web fixtures as configured).
    explicit Pipeline(PipelineConfig config);

    /// Injection constructor for tests and embedding: supply the transport
    /// client and web backend directly.
    Pipeline(PipelineConfig config, std::shared_ptr<CompletionClient> client,
             std::shared_ptr<WebToolBackend> web_backend);

    /// Launches all enabled sources concurrently, awaits all, assembles the
    /// EvidenceBundle (failed or disabled sources become explicit empty
    /// lists), and integrates. With exactly one enabled source Stage 2 is
    /// bypassed and the lone list becomes the final list. Throws
    /// PipelineError only when every enabled source fails. Persists the
    /// outcome when a store is attached.
    CaseOutcome run_case(const CaseReport& report);

    /// Attach/detach run-artifact persistence.
    void set_store(std::shared_ptr<RunStore> store) { store_ = std::move(store); }

    /// Variant knobs for ablation runs. Throws ConfigError on an empty set.
    void set_sources(std::set<Source> sources);
    void set_strategy(Strategy strategy) { config_.strategy = strategy; }

    const PipelineConfig& config() const { return config_; }
    LlmGateway& gateway() { return *gateway_; }
    const PromptCatalog& prompts() const { return prompts_; }
    const SynonymTable& synonyms() const;
    const CaseDatabase* case_database() const { return case_db_.get(); }

private:
    SourceResult run_source(Source source, const CaseReport& report, RunRecorder& recorder);

    PipelineConfig config_;
    PromptCatalog prompts_;
    std::shared_ptr<LlmGateway> gateway_;
    std::shared_ptr<WebToolBackend> web_backend_;
    std::shared_ptr<const EntityExtractor> extractor_;
    std::shared_ptr<CaseDatabase> case_db_;
    std::unique_ptr<SoapStructurer> soap_;
    std::unique_ptr<CaseDiagnoser> case_diagnoser_;
    std::unique_ptr<EvidenceIntegrator> integrator_;
    std::shared_ptr<RunStore> store_;
};

/// Reads an evaluation set: same line-delimited record shape as the corpus,
/// with an optional `id` field (default "case-<line>"). `case` holds the
/// narrative; `reasoning`/`diagnosis` become gold labels when present.
std::vector<CaseReport> load_case_set(const std::string& path);

} // namespace polydx
