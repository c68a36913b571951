#include "polydx/config.hpp"

#include "polydx/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace polydx {
namespace {

std::string trim_copy(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "yes" || value == "1" || value == "on") return true;
    if (value == "false" || value == "no" || value == "0" || value == "off") return false;
    throw ConfigError("expected a boolean for " + key + ", got '" + value + "'");
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        auto parsed = std::stoll(value);
        if (parsed < 0) throw ConfigError(key + " must be >= 0");
        return static_cast<std::size_t>(parsed);
    } catch (const std::invalid_argument&) {
        throw ConfigError("expected a number for " + key + ", got '" + value + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("value out of range for " + key);
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        return std::stoi(value);
    } catch (const std::exception&) {
        throw ConfigError("expected an integer for " + key + ", got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        return std::stod(value);
    } catch (const std::exception&) {
        throw ConfigError("expected a number for " + key + ", got '" + value + "'");
    }
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream parts(value);
    std::string part;
    while (std::getline(parts, part, ',')) {
        auto cleaned = trim_copy(part);
        if (!cleaned.empty()) out.push_back(cleaned);
    }
    return out;
}

std::string env_or(const char* name, std::string fallback) {
    const char* value = std::getenv(name);
    return value ? std::string(value) : std::move(fallback);
}

} // namespace

void apply_config_entry(PipelineConfig& config, const std::string& key, const std::string& value) {
    if (key == "sources") {
        config.sources.clear();
        for (const auto& name : split_list(value)) {
            auto source = source_from_string(name);
            if (!source || *source == Source::Final) {
                throw ConfigError("unknown source '" + name + "' in sources");
            }
            config.sources.insert(*source);
        }
    } else if (key == "k_cases") {
        config.k_cases = parse_size(key, value);
    } else if (key == "k_traces") {
        config.k_traces = parse_size(key, value);
    } else if (key == "strategy") {
        auto strategy = strategy_from_string(value);
        if (!strategy) throw ConfigError("unknown strategy '" + value + "'");
        config.strategy = *strategy;
    } else if (key == "output_len") {
        config.output_len = parse_size(key, value);
    } else if (key == "max_steps") {
        config.agent.max_steps = parse_size(key, value);
    } else if (key == "memory_budget") {
        config.agent.memory_budget_chars = parse_size(key, value);
    } else if (key == "blocklist") {
        config.extra_blocked_hosts = split_list(value);
    } else if (key == "soap_bypass") {
        config.soap_bypass = parse_bool(key, value);
    } else if (key == "prompt_budget") {
        config.prompt_budget_chars = parse_size(key, value);
    } else if (key == "gateway") {
        config.gateway_kind = value;
    } else if (key == "mock_script") {
        config.mock_script = value;
    } else if (key == "provider.endpoint") {
        config.provider.endpoint = value;
    } else if (key == "provider.chat_path") {
        config.provider.chat_path = value;
    } else if (key == "provider.model") {
        config.provider.model = value;
    } else if (key == "provider.api_key") {
        config.provider.api_key = value;
    } else if (key == "provider.api_key_env") {
        config.provider.api_key = env_or(value.c_str(), config.provider.api_key);
    } else if (key == "provider.timeout") {
        config.provider.timeout_seconds = parse_int(key, value);
    } else if (key == "retries") {
        config.gateway.max_attempts = parse_int(key, value);
    } else if (key == "backoff_ms") {
        config.gateway.backoff_base = std::chrono::milliseconds(parse_int(key, value));
    } else if (key == "concurrency") {
        config.gateway.concurrency_limit = parse_int(key, value);
    } else if (key == "temperature") {
        config.temperature = parse_double(key, value);
    } else if (key == "max_output_tokens") {
        config.max_output_tokens = parse_int(key, value);
    } else if (key == "web.backend") {
        config.web_backend = value;
    } else if (key == "web.fixtures") {
        config.web_fixtures_dir = value;
    } else if (key == "web.search_endpoint") {
        config.live_web.search_endpoint = value;
    } else if (key == "web.search_api_key") {
        config.live_web.search_api_key = value;
    } else if (key == "web.search_api_key_env") {
        config.live_web.search_api_key = env_or(value.c_str(), config.live_web.search_api_key);
    } else if (key == "web.user_agent") {
        config.live_web.user_agent = value;
    } else if (key == "web.rate_limit_ms") {
        config.live_web.per_host_interval_ms = parse_int(key, value);
    } else if (key == "extractor") {
        config.extractor = value;
    } else if (key == "ner.endpoint") {
        config.ner_endpoint = value;
    } else if (key == "ner.fallback") {
        config.ner_fallback_to_lexicon = parse_bool(key, value);
    } else if (key == "corpus") {
        config.corpus_path = value;
    } else if (key == "lexicon") {
        config.lexicon_path = value;
    } else if (key == "synonyms") {
        config.synonyms_path = value;
    } else if (key == "prompts_dir") {
        config.prompts_dir = value;
    } else if (key == "matcher") {
        config.matcher = value;
    } else if (key == "eval.recall") {
        config.eval_recall = parse_bool(key, value);
    } else if (key == "eval.batched_recall") {
        config.batched_recall_judging = parse_bool(key, value);
    } else if (key == "eval.parallelism") {
        config.eval_parallelism = parse_size(key, value);
    } else if (key == "output_dir") {
        config.output_dir = value;
    } else {
        throw ConfigError("unknown configuration key: " + key);
    }
}

void validate(const PipelineConfig& config) {
    if (config.sources.empty()) throw ConfigError("sources must not be empty");
    if (config.output_len < 1) throw ConfigError("output_len must be >= 1");
    if (config.agent.max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (config.gateway.concurrency_limit < 1) throw ConfigError("concurrency must be >= 1");
    if (config.gateway.max_attempts < 1) throw ConfigError("retries must be >= 1");
    if (config.gateway_kind != "http" && config.gateway_kind != "mock") {
        throw ConfigError("gateway must be 'http' or 'mock'");
    }
    if (config.gateway_kind == "mock" && config.mock_script.empty()) {
        throw ConfigError("gateway = mock requires mock_script");
    }
    if (config.web_backend != "recorded" && config.web_backend != "live") {
        throw ConfigError("web.backend must be 'recorded' or 'live'");
    }
    if (config.extractor != "lexicon" && config.extractor != "remote") {
        throw ConfigError("extractor must be 'lexicon' or 'remote'");
    }
    if (config.extractor == "remote" && config.ner_endpoint.empty()) {
        throw ConfigError("extractor = remote requires ner.endpoint");
    }
    if (config.matcher != "judge" && config.matcher != "exact") {
        throw ConfigError("matcher must be 'judge' or 'exact'");
    }
    bool needs_corpus = config.sources.count(Source::Case) || config.sources.count(Source::Trace);
    if (needs_corpus && config.corpus_path.empty()) {
        throw ConfigError("case/trace sources require a corpus path");
    }
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);

    PipelineConfig config;
    // Credential defaults come from the environment; explicit entries win.
    config.provider.api_key = env_or("POLYDX_API_KEY", "");
    config.live_web.search_api_key = env_or("POLYDX_SEARCH_API_KEY", "");

    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        auto body = trim_copy(line);
        if (body.empty() || body.front() == '#') continue;
        auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw FormatError("expected key = value", line_number);
        }
        auto key = trim_copy(body.substr(0, eq));
        auto value = trim_copy(body.substr(eq + 1));
        try {
            apply_config_entry(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " at " + path + ":" +
                              std::to_string(line_number));
        }
    }
    validate(config);
    return config;
}

} // namespace polydx
