#pragma once

#include "polydx/casedb.hpp"
#include "polydx/gateway.hpp"
#include "polydx/integrator.hpp"
#include "polydx/pipeline.hpp"
#include "polydx/prompts.hpp"
#include "polydx/types.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace polydx {

/// One diagnosis-equivalence decision, kept for audit. Judge verdicts carry
/// the judge completion.
struct MatchVerdict {
    std::string predicted;
    std::string gold;
    bool equivalent = false;
    std::string matcher; ///< exact-normalized | judge
    std::string judge_completion;
};

class DiagnosisMatcher {
public:
    virtual ~DiagnosisMatcher() = default;
    virtual MatchVerdict match(const std::string& predicted, const std::string& gold) = 0;
    virtual std::string name() const = 0;
};

/// normalize_disease_name equality, optionally unified through a synonym
/// table. The offline/test default.
class ExactNormalizedMatcher : public DiagnosisMatcher {
public:
    ExactNormalizedMatcher() = default;
    explicit ExactNormalizedMatcher(SynonymTable synonyms);

    MatchVerdict match(const std::string& predicted, const std::string& gold) override;
    std::string name() const override { return "exact-normalized"; }

private:
    std::optional<SynonymTable> synonyms_;
};

/// Asks the gateway a yes/no equivalence question and parses the verdict.
/// An unparsable verdict counts as not equivalent.
class JudgeMatcher : public DiagnosisMatcher {
public:
    JudgeMatcher(LlmGateway& gateway, const PromptCatalog& prompts, CompletionRequest base_request,
                 RunRecorder* recorder = nullptr);

    MatchVerdict match(const std::string& predicted, const std::string& gold) override;
    std::string name() const override { return "judge"; }

private:
    LlmGateway& gateway_;
    const PromptCatalog& prompts_;
    CompletionRequest base_;
    RunRecorder* recorder_;
};

/// True iff any of the first min(k, len) predictions is equivalent to the
/// gold diagnosis under the matcher.
bool hit_at_k(const DiseaseList& prediction, const std::string& gold, std::size_t k,
              DiagnosisMatcher& matcher);

/// Per-step coverage judge for reasoning recall.
class StepJudge {
public:
    virtual ~StepJudge() = default;
    virtual bool covers(const std::string& predicted_reasoning, const std::string& gold_step) = 0;
};

/// One gateway call per gold step (clearer audit), or one batched call
/// listing all steps when `batched` is set.
class LlmStepJudge : public StepJudge {
public:
    LlmStepJudge(LlmGateway& gateway, const PromptCatalog& prompts, CompletionRequest base_request,
                 RunRecorder* recorder = nullptr);

    bool covers(const std::string& predicted_reasoning, const std::string& gold_step) override;

    /// Batched variant: verdict per step from a single completion.
    std::vector<bool> covers_batch(const std::string& predicted_reasoning,
                                   const std::vector<std::string>& gold_steps);

private:
    LlmGateway& gateway_;
    const PromptCatalog& prompts_;
    CompletionRequest base_;
    RunRecorder* recorder_;
};

/// Fraction of gold reasoning steps (via segment_trace) the predicted
/// reasoning covers. nullopt when the gold trace yields zero steps (the
/// case is reported as skipped).
std::optional<double> reasoning_recall(const std::string& predicted_reasoning,
                                       const std::string& gold_reasoning, StepJudge& judge);

std::optional<double> reasoning_recall_batched(const std::string& predicted_reasoning,
                                               const std::string& gold_reasoning,
                                               LlmStepJudge& judge);

/// Seen: the gold diagnosis matches some corpus diagnosis under
/// normalization + synonyms. Cases lacking a gold diagnosis are excluded
/// with a warning note.
struct SplitResult {
    std::vector<CaseReport> seen;
    std::vector<CaseReport> unseen;
    std::vector<CaseReport> excluded;
};

SplitResult seen_unseen_split(const std::vector<CaseReport>& cases,
                              const std::vector<CorpusInstance>& corpus,
                              const SynonymTable& synonyms);

/// Metrics for one run (or the mean over runs).
struct MetricValues {
    double hit1 = 0.0;
    double hit5 = 0.0;
    double hit10 = 0.0;
    std::optional<double> recall; ///< mean reasoning recall over judged cases
    std::size_t n_cases = 0;      ///< evaluated (excluded not counted)
    std::size_t n_excluded = 0;
    std::size_t n_recall_skipped = 0;
};

struct PartitionReport {
    std::string label; ///< seen | unseen
    std::vector<MetricValues> per_run;
    MetricValues mean;
};

struct MetricReport {
    std::vector<MetricValues> per_run;
    MetricValues mean;
    std::vector<PartitionReport> partitions;
    /// Mean per-case cost by module, Table-style accounting.
    std::map<std::string, ModuleCost> mean_module_cost;
    std::map<std::string, double> mean_module_latency_seconds;
};

/// Renders the report as a readable table (one per-run row plus a mean
/// row), and as a structured record.
std::string format_report(const MetricReport& report);
std::string to_json(const MetricReport& report);

struct EvalOptions {
    std::size_t runs = 1;
    bool compute_recall = true;
    bool batched_recall = false;
    bool split_seen_unseen = false;
    std::size_t parallelism = 1;
};

class EvalHarness {
public:
    EvalHarness(Pipeline& pipeline, std::shared_ptr<DiagnosisMatcher> matcher,
                std::shared_ptr<StepJudge> judge);

    /// Executes the pipeline per case per run. Per-case failures are
    /// recorded and excluded from denominators with an explicit count.
    MetricReport run_evaluation(const std::vector<CaseReport>& cases, const EvalOptions& options);

    /// Pure metric fold over completed outcomes; calling it twice over the
    /// same outcomes yields identical values.
    MetricValues compute_metrics(const std::vector<CaseReport>& cases,
                                 const std::vector<std::optional<CaseOutcome>>& outcomes,
                                 bool compute_recall, bool batched_recall);

    /// One named source-subset/strategy variant per report. Single-source
    /// variants bypass Stage 2 by construction. Throws ConfigError for an
    /// empty source subset.
    struct Variant {
        std::string name;
        std::set<Source> sources;
        Strategy strategy = Strategy::Differential;
    };

    std::vector<std::pair<std::string, MetricReport>>
    run_ablation(const std::vector<CaseReport>& cases, const std::vector<Variant>& variants,
                 const EvalOptions& options);

private:
    Pipeline& pipeline_;
    std::shared_ptr<DiagnosisMatcher> matcher_;
    std::shared_ptr<StepJudge> judge_;
};

/// Parses "soap,web,case,trace,vote,differential"-style variant tokens:
/// source names become single-source variants; strategy names become
/// all-source variants with that strategy.
std::vector<EvalHarness::Variant> parse_variants(const std::string& spec_text);

} // namespace polydx
