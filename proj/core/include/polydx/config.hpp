#pragma once

#include "polydx/gateway.hpp"
#include "polydx/integrator.hpp"
#include "polydx/types.hpp"
#include "polydx/webagent.hpp"

#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace polydx {

/// Full pipeline configuration. Loaded from a flat key=value file with
/// environment-variable overrides for credentials.
struct PipelineConfig {
    /// Enabled Stage-1 sources; must be non-empty.
    std::set<Source> sources{Source::Soap, Source::Web, Source::Case, Source::Trace};

    /// Retrieval depths. 0 disables retrieval context but still prompts.
    std::size_t k_cases = 10;
    std::size_t k_traces = 10;

    Strategy strategy = Strategy::Differential;
    std::size_t output_len = 10;

    AgentOptions agent;
    std::vector<std::string> extra_blocked_hosts;

    /// Skip the SOAP structuring call for pre-structured inputs.
    bool soap_bypass = false;

    std::size_t prompt_budget_chars = 48000;

    // gateway
    std::string gateway_kind = "http"; ///< http | mock
    std::string mock_script;           ///< entry file when gateway_kind = mock
    ProviderSettings provider;
    GatewayOptions gateway;
    double temperature = 0.0;
    int max_output_tokens = 4096;

    // web backend
    std::string web_backend = "recorded"; ///< recorded | live
    std::string web_fixtures_dir;
    LiveWebSettings live_web;

    // entity extraction
    std::string extractor = "lexicon"; ///< lexicon | remote
    std::string ner_endpoint;
    bool ner_fallback_to_lexicon = true;

    // data files
    std::string corpus_path;
    std::string lexicon_path;
    std::string synonyms_path;
    std::string prompts_dir;

    // evaluation
    std::string matcher = "judge"; ///< judge | exact
    bool eval_recall = true;
    bool batched_recall_judging = false;
    std::size_t eval_parallelism = 2;

    std::string output_dir = "runs";
};

/// Throws ConfigError on invalid values (empty source set, unknown strategy,
/// concurrency below 1, ...).
void validate(const PipelineConfig& config);

/// Parses `key = value` lines; '#' starts a comment. Unknown keys throw
/// ConfigError. Credentials resolve from the environment (POLYDX_API_KEY,
/// POLYDX_SEARCH_API_KEY) unless overridden by provider.api_key /
/// web.search_api_key entries.
PipelineConfig load_config(const std::string& path);

/// Applies one key=value setting to an existing config (CLI overrides).
void apply_config_entry(PipelineConfig& config, const std::string& key, const std::string& value);

} // namespace polydx
