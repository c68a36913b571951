#pragma once

#include "polydx/gateway.hpp"
#include "polydx/prompts.hpp"
#include "polydx/types.hpp"

#include <cstddef>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace polydx {

/// High-level research plan: one query and one tool kind per step.
struct SearchPlan {
    std::vector<std::string> queries;
    std::vector<std::string> tools; ///< search | navigate | extract

    std::size_t steps() const { return queries.size(); }
};

struct SearchHit {
    std::string title;
    std::string url;
    std::string snippet;
};

/// Hosts the agent must never fetch. The defaults guard against benchmark
/// leakage and are always included; config can only add hosts.
class Blocklist {
public:
    Blocklist();
    explicit Blocklist(const std::vector<std::string>& extra_hosts);

    void add(const std::string& host);
    bool blocked_host(const std::string& host) const;
    bool blocked_url(const std::string& url) const;
    const std::set<std::string>& hosts() const { return hosts_; }

    /// Host part of a URL (no scheme, port, or path); empty when none.
    static std::string host_of(const std::string& url);

private:
    std::set<std::string> hosts_;
};

/// Web tool transport. `extract` selects the passage of the most recently
/// navigated page relevant to the query. Implementations throw ToolError on
/// transport failure.
class WebToolBackend {
public:
    virtual ~WebToolBackend() = default;
    virtual std::vector<SearchHit> search(const std::string& query) = 0;
    virtual std::string navigate(const std::string& url) = 0;
    virtual std::string extract(const std::string& query) = 0;
};

/// Replays canned responses from a directory of request-keyed files.
/// First-class backend for deterministic offline runs.
class RecordedWebBackend : public WebToolBackend {
public:
    explicit RecordedWebBackend(std::string dir);

    std::vector<SearchHit> search(const std::string& query) override;
    std::string navigate(const std::string& url) override;
    std::string extract(const std::string& query) override;

    /// Fixture authoring: writes the response file for a request.
    void store_search(const std::string& query, const std::vector<SearchHit>& hits);
    void store_navigate(const std::string& url, const std::string& page_text);
    void store_extract(const std::string& query, const std::string& passage);

    static std::string key_for(const std::string& tool, const std::string& argument);

private:
    std::string path_for(const std::string& tool, const std::string& argument) const;
    std::string load(const std::string& tool, const std::string& argument) const;

    std::string dir_;
};

/// Live backend: a search HTTP API plus a page fetcher with a polite
/// user-agent and a per-host minimum request interval.
struct LiveWebSettings {
    std::string search_endpoint; ///< GET <endpoint>?q=<query>, JSON results
    std::string search_api_key;
    std::string user_agent = "polydx-research/0.1 (+https://localhost)";
    int per_host_interval_ms = 1000;
    int timeout_seconds = 30;
    std::size_t max_page_chars = 20000;
};

class LiveWebBackend : public WebToolBackend {
public:
    explicit LiveWebBackend(LiveWebSettings settings);
    ~LiveWebBackend() override;

    std::vector<SearchHit> search(const std::string& query) override;
    std::string navigate(const std::string& url) override;
    std::string extract(const std::string& query) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Accumulated research evidence. m0 is empty; size stays within the
/// configured budget at every step.
struct MemoryState {
    std::string evidence;
    std::size_t step = 0;
    std::vector<std::string> source_urls;
};

struct AgentOptions {
    std::size_t max_steps = 8;
    std::size_t memory_budget_chars = 8000;
};

/// Stage-1 source #2: plan web queries, iteratively invoke
/// search/navigate/extract, fold results into a memory state, and elicit a
/// disease list from the final memory. One run is internally sequential;
/// runs for different cases may proceed concurrently.
class WebResearchAgent {
public:
    WebResearchAgent(LlmGateway& gateway, const PromptCatalog& prompts,
                     std::shared_ptr<WebToolBackend> backend, Blocklist blocklist,
                     CompletionRequest base_request, AgentOptions options = {});

    /// Parses a structured plan from the planning completion; clamps the
    /// step count to max_steps and coerces unknown tool kinds to search.
    /// Throws PlanParseError when no query can be extracted.
    SearchPlan make_plan(const CaseReport& report, RunRecorder* recorder);

    /// Single-step plan used when planning fails: one search built from the
    /// case's opening findings.
    static SearchPlan fallback_plan(const CaseReport& report);

    /// Executes one step. Blocklisted navigations are flagged and never
    /// reach the backend; transport failures are folded into the result so
    /// the loop continues.
    ToolInvocation invoke_tool(int step, const std::string& tool, const std::string& argument);

    /// Folds a step result into memory via the memory-update prompt.
    /// Blocked and failed steps append a one-line note without an LLM call.
    /// The result is truncated to the memory budget with a marker.
    MemoryState update_memory(const MemoryState& memory, const ToolInvocation& invocation,
                              RunRecorder* recorder);

    /// Elicits the disease list from the final memory (and the case).
    SourceResult diagnose_from_memory(const CaseReport& report, const MemoryState& memory,
                                      RunRecorder* recorder);

    /// plan -> invoke/update loop -> diagnose, with the full tool log
    /// recorded.
    SourceResult run(const CaseReport& report, RunRecorder* recorder);

    const AgentOptions& options() const { return options_; }
    const Blocklist& blocklist() const { return blocklist_; }

private:
    LlmGateway& gateway_;
    const PromptCatalog& prompts_;
    std::shared_ptr<WebToolBackend> backend_;
    Blocklist blocklist_;
    CompletionRequest base_;
    AgentOptions options_;
};

} // namespace polydx
