#include "polydx/gateway.hpp"

#include "polydx/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace polydx {
namespace {

// Deterministic token estimate: whitespace-delimited words. Used by the
// mock and as the fallback when a provider omits usage numbers.
std::int64_t word_count(const std::string& text) {
    std::int64_t count = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

} // namespace

void ScriptedMockClient::add(MockEntry entry) {
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(entry));
    consumed_.push_back(false);
}

ScriptedMockClient& ScriptedMockClient::on(std::string pattern, std::string completion,
                                           int delay_ms) {
    MockEntry entry;
    entry.pattern = std::move(pattern);
    entry.completion = std::move(completion);
    entry.delay_ms = delay_ms;
    add(std::move(entry));
    return *this;
}

std::shared_ptr<ScriptedMockClient> ScriptedMockClient::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mock script: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();

    auto client = std::make_shared<ScriptedMockClient>();
    try {
        auto j = nlohmann::json::parse(buffer.str());
        for (const auto& e : j) {
            MockEntry entry;
            entry.pattern = e.at("pattern").get<std::string>();
            entry.completion = e.at("completion").get<std::string>();
            entry.exact = e.value("exact", false);
            entry.also_contains = e.value("also_contains", std::vector<std::string>{});
            entry.delay_ms = e.value("delay_ms", 0);
            entry.once = e.value("once", false);
            client->add(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad mock script ") + path + ": " + e.what(), 0);
    }
    return client;
}

CompletionResponse ScriptedMockClient::complete(const CompletionRequest& request) {
    int delay_ms = 0;
    std::string completion;
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request.prompt);
        bool found = false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (consumed_[i]) continue;
            const auto& entry = entries_[i];
            bool matches = entry.exact ? (request.prompt == entry.pattern)
                                       : (request.prompt.find(entry.pattern) != std::string::npos);
            for (const auto& needle : entry.also_contains) {
                matches = matches && request.prompt.find(needle) != std::string::npos;
            }
            if (!matches) continue;
            completion = entry.completion;
            delay_ms = entry.delay_ms;
            if (entry.once) consumed_[i] = true;
            found = true;
            break;
        }
        if (!found) {
            auto head = request.prompt.substr(0, 120);
            throw MockMissError("no scripted entry matches prompt: \"" + head + "...\"");
        }
    }
    if (delay_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    }
    CompletionResponse response;
    response.text = std::move(completion);
    response.prompt_tokens = word_count(request.prompt);
    response.completion_tokens = word_count(response.text);
    response.latency_seconds = delay_ms / 1000.0;
    return response;
}

std::vector<std::string> ScriptedMockClient::call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

HttpCompletionClient::HttpCompletionClient(ProviderSettings settings)
    : settings_(std::move(settings)) {
    if (settings_.endpoint.empty()) throw ConfigError("provider endpoint is empty");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (settings_.endpoint.rfind("https://", 0) == 0) {
        throw ConfigError("built without TLS support; use an http:// endpoint or a proxy");
    }
#endif
}

CompletionResponse HttpCompletionClient::complete(const CompletionRequest& request) {
    nlohmann::json body{{"model", request.model_id.empty() ? settings_.model : request.model_id},
                        {"messages", {{{"role", "user"}, {"content", request.prompt}}}},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_output_tokens}};

    httplib::Client client(settings_.endpoint);
    client.set_connection_timeout(settings_.timeout_seconds, 0);
    client.set_read_timeout(settings_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!settings_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + settings_.api_key);
    }

    auto started = std::chrono::steady_clock::now();
    auto result = client.Post(settings_.chat_path, headers, body.dump(), "application/json");
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);

    if (!result) {
        throw TransportError("provider unreachable: " + httplib::to_string(result.error()));
    }
    if (result->status == 429 || result->status >= 500) {
        throw TransportError("provider returned status " + std::to_string(result->status));
    }
    if (result->status != 200) {
        throw ProviderError("provider returned status " + std::to_string(result->status) + ": " +
                            result->body.substr(0, 200));
    }

    CompletionResponse response;
    try {
        auto j = nlohmann::json::parse(result->body);
        response.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            response.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
            response.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected provider response shape: ") + e.what());
    }
    if (response.prompt_tokens == 0) response.prompt_tokens = word_count(request.prompt);
    if (response.completion_tokens == 0) response.completion_tokens = word_count(response.text);
    response.latency_seconds = elapsed.count();
    return response;
}

LlmGateway::LlmGateway(std::shared_ptr<CompletionClient> client, GatewayOptions options)
    : client_(std::move(client)), options_(options) {
    if (!client_) throw ConfigError("gateway requires a completion client");
    if (options_.concurrency_limit < 1) throw ConfigError("concurrency limit must be >= 1");
    if (options_.max_attempts < 1) throw ConfigError("max attempts must be >= 1");
}

LlmGateway& LlmGateway::with_concurrency_limit(int limit) {
    if (limit < 1) throw ConfigError("concurrency limit must be >= 1");
    std::lock_guard lock(mutex_);
    options_.concurrency_limit = limit;
    return *this;
}

int LlmGateway::concurrency_limit() const {
    std::lock_guard lock(mutex_);
    return options_.concurrency_limit;
}

CompletionResponse LlmGateway::complete(const std::string& module,
                                        const CompletionRequest& request, RunRecorder* recorder) {
    if (request.prompt.empty()) throw ConfigError("completion request has an empty prompt");

    {
        std::unique_lock lock(mutex_);
        slot_free_.wait(lock, [&] { return in_flight_ < options_.concurrency_limit; });
        ++in_flight_;
    }
    struct SlotRelease {
        LlmGateway* gateway;
        ~SlotRelease() {
            std::lock_guard lock(gateway->mutex_);
            --gateway->in_flight_;
            gateway->slot_free_.notify_one();
        }
    } release{this};

    CompletionResponse response;
    for (int attempt = 1;; ++attempt) {
        try {
            response = client_->complete(request);
            break;
        } catch (const TransportError& e) {
            if (attempt >= options_.max_attempts) {
                throw ProviderError("provider failed after " + std::to_string(attempt) +
                                    " attempts: " + e.what());
            }
            auto wait = options_.backoff_base * (1 << (attempt - 1));
            std::this_thread::sleep_for(wait);
        }
    }

    if (recorder) {
        recorder->add_call({module, request.prompt, response.text, response.prompt_tokens,
                            response.completion_tokens, response.latency_seconds});
    }
    return response;
}

} // namespace polydx
