#pragma once

#include "polydx/gateway.hpp"
#include "polydx/prompts.hpp"
#include "polydx/types.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace polydx {

/// Groups of equivalent surface forms. Lookup maps a normalized name to the
/// group's canonical key. Ships with a small seed; files extend it (one
/// group per line, pipe-separated surface forms). Full semantic unification
/// beyond this table is delegated to the Stage-2 LLM.
class SynonymTable {
public:
    /// Seed groups only.
    SynonymTable();

    void add_group(const std::vector<std::string>& surface_forms);
    /// Throws IoError. '#' lines are comments.
    void load_file(const std::string& path);

    /// Canonical key for a normalized name; identity when unknown.
    std::string canonical_key(const std::string& normalized_name) const;

private:
    std::map<std::string, std::string> key_by_normalized_;
};

struct GroupMember {
    Source source;
    int rank = 0;
    std::string surface; ///< name as emitted by that source
};

/// Candidates from different sources unified under one match key. Each
/// source contributes at most one member (its best-ranked occurrence).
struct CandidateGroup {
    std::string canonical; ///< display name: surface of the best-ranked member
    std::string key;       ///< normalized + synonym-mapped match key
    std::vector<GroupMember> members;
    int support = 0;   ///< distinct sources, 1..4
    int best_rank = 0; ///< minimum rank across members
    double mean_rank = 0.0;
};

/// Deterministic pre-grouping by normalized-name equality plus the synonym
/// table. Groups are returned in first-appearance order over the bundle
/// (soap, web, case, trace; by rank within each).
std::vector<CandidateGroup> match_groups(const EvidenceBundle& bundle, const SynonymTable& synonyms);

/// Deterministic voting baseline: groups ordered by (support desc,
/// best_rank asc, mean_rank asc, key lexicographic asc), truncated to
/// output_len. No LLM call.
DiseaseList simple_vote(const EvidenceBundle& bundle, const SynonymTable& synonyms,
                        std::size_t output_len);

/// Final consolidated output: reasoning trace plus the re-ranked list with
/// per-item justifications.
struct FinalDiagnosis {
    std::string reasoning;
    DiseaseList ranked; ///< source = Final
    std::string strategy;   ///< vote | differential | bypass
    bool degraded = false;  ///< differential output was unparsable, fell back to vote
};

std::string to_json(const FinalDiagnosis& diagnosis);
FinalDiagnosis final_diagnosis_from_json(const std::string& json_text);

enum class Strategy { Vote, Differential };

std::optional<Strategy> strategy_from_string(std::string_view name);
const char* to_string(Strategy strategy);

/// Stage 2: consolidate the four Stage-1 lists by matching, voting, and
/// differential diagnosis.
class EvidenceIntegrator {
public:
    EvidenceIntegrator(LlmGateway& gateway, const PromptCatalog& prompts, SynonymTable synonyms,
                       CompletionRequest base_request, std::size_t output_len = 10);

    std::vector<CandidateGroup> groups(const EvidenceBundle& bundle) const;
    FinalDiagnosis vote(const EvidenceBundle& bundle) const;

    /// One Stage-2 LLM call over the case, the four reasoning traces and
    /// lists, and the deterministic group summary. Falls back to the vote
    /// output (degraded flag set) when no final list parses.
    FinalDiagnosis differential(const CaseReport& report, const EvidenceBundle& bundle,
                                RunRecorder* recorder);

    FinalDiagnosis integrate(const CaseReport& report, const EvidenceBundle& bundle,
                             Strategy strategy, RunRecorder* recorder);

    const SynonymTable& synonyms() const { return synonyms_; }
    std::size_t output_len() const { return output_len_; }

private:
    LlmGateway& gateway_;
    const PromptCatalog& prompts_;
    SynonymTable synonyms_;
    CompletionRequest base_;
    std::size_t output_len_;
};

} // namespace polydx
