#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace polydx {

/// One LLM exchange, recorded verbatim. `module` names the pipeline module
/// that issued the call (soap, web, case, trace, integrate, judge, ...).
struct LlmCall {
    std::string module;
    std::string prompt;
    std::string completion;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double latency_seconds = 0.0;
};

/// One step of the web-research loop.
struct ToolInvocation {
    int step = 0;
    std::string tool; ///< search | navigate | extract
    std::string argument;
    std::string result; ///< empty when blocked or failed
    std::string url;    ///< target URL when applicable
    bool blocked = false;
    bool failed = false;
    std::string error;
};

struct ModuleCost {
    int calls = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double call_latency_seconds = 0.0;
};

/// Full provenance of one pipeline execution for one case.
struct RunRecord {
    std::string case_id;
    std::vector<LlmCall> calls;
    std::vector<ToolInvocation> tool_log;
    std::vector<std::string> notes;
    /// Wall-clock seconds per module (stage1, stage2, soap, web, ...).
    std::map<std::string, double> module_latency_seconds;

    /// Per-module call/token totals, derived from `calls`.
    std::map<std::string, ModuleCost> module_costs() const;
    std::int64_t total_prompt_tokens() const;
    std::int64_t total_completion_tokens() const;
};

std::string to_json(const RunRecord& record);
RunRecord run_record_from_json(const std::string& json_text);

/// Thread-safe sink for one case's RunRecord. Stage-1 sources run
/// concurrently and append through this.
class RunRecorder {
public:
    explicit RunRecorder(std::string case_id);

    void add_call(LlmCall call);
    void add_tool(ToolInvocation invocation);
    void add_note(std::string note);
    void add_module_latency(const std::string& module, double seconds);

    RunRecord snapshot() const;

private:
    mutable std::mutex mutex_;
    RunRecord record_;
};

} // namespace polydx
