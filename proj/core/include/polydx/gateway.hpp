#pragma once

#include "polydx/record.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace polydx {

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    std::string model_id;
};

struct CompletionResponse {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double latency_seconds = 0.0;
};

/// Transport-level completion backend. Implementations throw TransportError
/// for retryable failures, ProviderError for fatal ones, MockMissError for
/// unmatched mock prompts.
class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string name() const = 0;
};

/// One scripted entry: the first entry whose pattern matches the prompt is
/// replayed. Substring matching by default so canned scripts survive
/// whitespace changes in prompt templates. `also_contains` narrows a match
/// (every listed needle must appear too), which lets one script serve
/// several cases that share prompt templates.
struct MockEntry {
    std::string pattern;
    std::string completion;
    bool exact = false;
    std::vector<std::string> also_contains;
    int delay_ms = 0;    ///< simulated latency, slept and reported as-is
    bool once = false;   ///< consumed after first use
};

/// Deterministic scripted backend for offline runs and golden tests.
/// Token counts are whitespace word counts, so replays are bit-identical.
class ScriptedMockClient : public CompletionClient {
public:
    ScriptedMockClient() = default;

    void add(MockEntry entry);
    /// Convenience: substring pattern -> completion.
    ScriptedMockClient& on(std::string pattern, std::string completion, int delay_ms = 0);

    /// Loads a JSON array of entries: [{"pattern", "completion", "exact"?,
    /// "delay_ms"?, "once"?}, ...].
    static std::shared_ptr<ScriptedMockClient> load(const std::string& path);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return "mock"; }

    std::vector<std::string> call_log() const;

private:
    mutable std::mutex mutex_;
    std::vector<MockEntry> entries_;
    std::vector<bool> consumed_;
    std::vector<std::string> log_;
};

/// Chat-completion HTTP provider (OpenAI-style wire format). The endpoint
/// is scheme://host[:port]; the request path and credential come from
/// ProviderSettings.
struct ProviderSettings {
    std::string endpoint;
    std::string chat_path = "/chat/completions";
    std::string model;
    std::string api_key;
    int timeout_seconds = 120;
};

class HttpCompletionClient : public CompletionClient {
public:
    explicit HttpCompletionClient(ProviderSettings settings);
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return "http"; }

private:
    ProviderSettings settings_;
};

struct GatewayOptions {
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{1000}; ///< 1s, 2s, 4s, ...
    int concurrency_limit = 4;
};

/// Uniform completion interface over a transport client: retries transient
/// failures with exponential backoff, caps in-flight calls, and records
/// every exchange into the caller's RunRecorder. Shareable across
/// concurrent tasks.
class LlmGateway {
public:
    explicit LlmGateway(std::shared_ptr<CompletionClient> client, GatewayOptions options = {});

    /// Throws ConfigError when limit < 1.
    LlmGateway& with_concurrency_limit(int limit);
    int concurrency_limit() const;

    /// `module` tags the call in the RunRecord. Throws ProviderError once
    /// retries are exhausted; MockMissError propagates immediately.
    CompletionResponse complete(const std::string& module, const CompletionRequest& request,
                                RunRecorder* recorder = nullptr);

    const GatewayOptions& options() const { return options_; }
    CompletionClient& client() { return *client_; }

private:
    std::shared_ptr<CompletionClient> client_;
    GatewayOptions options_;

    mutable std::mutex mutex_;
    std::condition_variable slot_free_;
    int in_flight_ = 0;
};

} // namespace polydx
