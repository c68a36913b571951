#include "polydx/record.hpp"

#include "polydx/errors.hpp"

#include <nlohmann/json.hpp>

namespace polydx {

std::map<std::string, ModuleCost> RunRecord::module_costs() const {
    std::map<std::string, ModuleCost> costs;
    for (const auto& call : calls) {
        auto& cost = costs[call.module];
        cost.calls += 1;
        cost.prompt_tokens += call.prompt_tokens;
        cost.completion_tokens += call.completion_tokens;
        cost.call_latency_seconds += call.latency_seconds;
    }
    return costs;
}

std::int64_t RunRecord::total_prompt_tokens() const {
    std::int64_t total = 0;
    for (const auto& call : calls) total += call.prompt_tokens;
    return total;
}

std::int64_t RunRecord::total_completion_tokens() const {
    std::int64_t total = 0;
    for (const auto& call : calls) total += call.completion_tokens;
    return total;
}

std::string to_json(const RunRecord& record) {
    nlohmann::json calls = nlohmann::json::array();
    for (const auto& call : record.calls) {
        calls.push_back({{"module", call.module},
                         {"prompt", call.prompt},
                         {"completion", call.completion},
                         {"prompt_tokens", call.prompt_tokens},
                         {"completion_tokens", call.completion_tokens},
                         {"latency_seconds", call.latency_seconds}});
    }
    nlohmann::json tools = nlohmann::json::array();
    for (const auto& t : record.tool_log) {
        tools.push_back({{"step", t.step},
                         {"tool", t.tool},
                         {"argument", t.argument},
                         {"result", t.result},
                         {"url", t.url},
                         {"blocked", t.blocked},
                         {"failed", t.failed},
                         {"error", t.error}});
    }
    nlohmann::json j{{"case_id", record.case_id},
                     {"calls", std::move(calls)},
                     {"tool_log", std::move(tools)},
                     {"notes", record.notes},
                     {"module_latency_seconds", record.module_latency_seconds}};
    return j.dump(2);
}

RunRecord run_record_from_json(const std::string& json_text) {
    RunRecord record;
    try {
        auto j = nlohmann::json::parse(json_text);
        record.case_id = j.at("case_id").get<std::string>();
        for (const auto& c : j.at("calls")) {
            LlmCall call;
            call.module = c.at("module").get<std::string>();
            call.prompt = c.at("prompt").get<std::string>();
            call.completion = c.at("completion").get<std::string>();
            call.prompt_tokens = c.at("prompt_tokens").get<std::int64_t>();
            call.completion_tokens = c.at("completion_tokens").get<std::int64_t>();
            call.latency_seconds = c.at("latency_seconds").get<double>();
            record.calls.push_back(std::move(call));
        }
        for (const auto& t : j.at("tool_log")) {
            ToolInvocation inv;
            inv.step = t.at("step").get<int>();
            inv.tool = t.at("tool").get<std::string>();
            inv.argument = t.at("argument").get<std::string>();
            inv.result = t.at("result").get<std::string>();
            inv.url = t.at("url").get<std::string>();
            inv.blocked = t.at("blocked").get<bool>();
            inv.failed = t.at("failed").get<bool>();
            inv.error = t.at("error").get<std::string>();
            record.tool_log.push_back(std::move(inv));
        }
        record.notes = j.at("notes").get<std::vector<std::string>>();
        record.module_latency_seconds =
            j.at("module_latency_seconds").get<std::map<std::string, double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad run record: ") + e.what(), 0);
    }
    return record;
}

RunRecorder::RunRecorder(std::string case_id) { record_.case_id = std::move(case_id); }

void RunRecorder::add_call(LlmCall call) {
    std::lock_guard lock(mutex_);
    record_.calls.push_back(std::move(call));
}

void RunRecorder::add_tool(ToolInvocation invocation) {
    std::lock_guard lock(mutex_);
    record_.tool_log.push_back(std::move(invocation));
}

void RunRecorder::add_note(std::string note) {
    std::lock_guard lock(mutex_);
    record_.notes.push_back(std::move(note));
}

void RunRecorder::add_module_latency(const std::string& module, double seconds) {
    std::lock_guard lock(mutex_);
    record_.module_latency_seconds[module] += seconds;
}

RunRecord RunRecorder::snapshot() const {
    std::lock_guard lock(mutex_);
    return record_;
}

} // namespace polydx
