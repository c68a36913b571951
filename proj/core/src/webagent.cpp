#include "polydx/webagent.hpp"

#include "polydx/errors.hpp"
#include "polydx/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <strings.h>
#include <thread>
#include <unordered_set>

namespace polydx {
namespace {

const char* const kDefaultBlockedHosts[] = {
    "pubmed.ncbi.nlm.nih.gov",
    "huggingface.co",
};

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim_copy(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

Blocklist::Blocklist() {
    for (const char* host : kDefaultBlockedHosts) hosts_.insert(host);
}

Blocklist::Blocklist(const std::vector<std::string>& extra_hosts) : Blocklist() {
    for (const auto& host : extra_hosts) add(host);
}

void Blocklist::add(const std::string& host) {
    auto cleaned = to_lower(trim_copy(host));
    if (!cleaned.empty()) hosts_.insert(std::move(cleaned));
}

std::string Blocklist::host_of(const std::string& url) {
    std::string rest = url;
    auto scheme = rest.find("://");
    if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
    auto end = rest.find_first_of("/?#:");
    if (end != std::string::npos) rest = rest.substr(0, end);
    return to_lower(trim_copy(rest));
}

bool Blocklist::blocked_host(const std::string& host) const {
    auto cleaned = to_lower(trim_copy(host));
    if (cleaned.empty()) return false;
    if (hosts_.count(cleaned)) return true;
    for (const auto& pattern : hosts_) {
        if (cleaned.size() > pattern.size() &&
            cleaned.compare(cleaned.size() - pattern.size(), pattern.size(), pattern) == 0 &&
            cleaned[cleaned.size() - pattern.size() - 1] == '.') {
            return true;
        }
    }
    return false;
}

bool Blocklist::blocked_url(const std::string& url) const { return blocked_host(host_of(url)); }

// ---------------------------------------------------------------------------
// Recorded backend

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : s) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string slugify(const std::string& s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            if (pending && !out.empty()) out += '-';
            pending = false;
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            pending = true;
        }
    }
    return out;
}

} // namespace

std::string RecordedWebBackend::key_for(const std::string& tool, const std::string& argument) {
    constexpr std::size_t kMaxSlug = 60;
    if (argument.size() <= kMaxSlug) {
        return tool + "--" + slugify(argument);
    }
    std::ostringstream hash;
    hash << std::hex << (fnv1a(argument) & 0xffffffffull);
    return tool + "--" + slugify(argument.substr(0, kMaxSlug)) + "-" + hash.str();
}

RecordedWebBackend::RecordedWebBackend(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string RecordedWebBackend::path_for(const std::string& tool, const std::string& argument) const {
    return (std::filesystem::path(dir_) / (key_for(tool, argument) + ".json")).string();
}

std::string RecordedWebBackend::load(const std::string& tool, const std::string& argument) const {
    auto path = path_for(tool, argument);
    std::ifstream in(path);
    if (!in) {
        throw ToolError("no recorded response for " + tool + "(\"" + argument + "\"), expected " +
                        path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<SearchHit> RecordedWebBackend::search(const std::string& query) {
    auto body = load("search", query);
    std::vector<SearchHit> hits;
    try {
        auto j = nlohmann::json::parse(body);
        for (const auto& h : j.at("hits")) {
            hits.push_back({h.value("title", std::string{}), h.value("url", std::string{}),
                            h.value("snippet", std::string{})});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ToolError(std::string("bad recorded search response: ") + e.what());
    }
    return hits;
}

std::string RecordedWebBackend::navigate(const std::string& url) {
    try {
        return nlohmann::json::parse(load("navigate", url)).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ToolError(std::string("bad recorded navigate response: ") + e.what());
    }
}

std::string RecordedWebBackend::extract(const std::string& query) {
    try {
        return nlohmann::json::parse(load("extract", query)).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ToolError(std::string("bad recorded extract response: ") + e.what());
    }
}

void RecordedWebBackend::store_search(const std::string& query,
                                      const std::vector<SearchHit>& hits) {
    nlohmann::json array = nlohmann::json::array();
    for (const auto& h : hits) {
        array.push_back({{"title", h.title}, {"url", h.url}, {"snippet", h.snippet}});
    }
    std::ofstream out(path_for("search", query));
    out << nlohmann::json{{"hits", std::move(array)}}.dump(2);
}

void RecordedWebBackend::store_navigate(const std::string& url, const std::string& page_text) {
    std::ofstream out(path_for("navigate", url));
    out << nlohmann::json{{"text", page_text}}.dump(2);
}

void RecordedWebBackend::store_extract(const std::string& query, const std::string& passage) {
    std::ofstream out(path_for("extract", query));
    out << nlohmann::json{{"text", passage}}.dump(2);
}

// ---------------------------------------------------------------------------
// Live backend

namespace {

std::string url_encode(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else if (c == ' ') {
            out += '+';
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

std::string html_to_text(const std::string& html) {
    std::string out;
    out.reserve(html.size());
    std::size_t i = 0;
    auto skip_block = [&](const char* open, const char* close) {
        if (i + std::strlen(open) <= html.size() &&
            strncasecmp(html.c_str() + i, open, std::strlen(open)) == 0) {
            auto end = html.find(close, i);
            i = end == std::string::npos ? html.size() : end + std::strlen(close);
            return true;
        }
        return false;
    };
    while (i < html.size()) {
        if (html[i] == '<') {
            if (skip_block("<script", "</script>") || skip_block("<style", "</style>")) continue;
            auto end = html.find('>', i);
            i = end == std::string::npos ? html.size() : end + 1;
            out += ' ';
            continue;
        }
        if (html[i] == '&') {
            static const std::pair<const char*, char> entities[] = {
                {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&#39;", '\''},
            };
            bool matched = false;
            for (auto [name, repl] : entities) {
                auto len = std::strlen(name);
                if (html.compare(i, len, name) == 0) {
                    out += repl;
                    i += len;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            if (html.compare(i, 6, "&nbsp;") == 0) {
                out += ' ';
                i += 6;
                continue;
            }
        }
        out += html[i++];
    }
    return out;
}

} // namespace

struct LiveWebBackend::Impl {
    LiveWebSettings settings;
    std::mutex mutex;
    std::map<std::string, std::chrono::steady_clock::time_point> next_allowed;
    std::string last_page;

    void rate_limit(const std::string& host) {
        std::chrono::steady_clock::time_point wait_until;
        {
            std::lock_guard lock(mutex);
            auto now = std::chrono::steady_clock::now();
            auto& slot = next_allowed[host];
            wait_until = std::max(slot, now);
            slot = wait_until + std::chrono::milliseconds(settings.per_host_interval_ms);
        }
        std::this_thread::sleep_until(wait_until);
    }

    std::string get(const std::string& url) {
        auto scheme_end = url.find("://");
        auto path_start =
            scheme_end == std::string::npos ? url.find('/') : url.find('/', scheme_end + 3);
        std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        rate_limit(Blocklist::host_of(url));

        httplib::Client client(base);
        client.set_follow_location(true);
        client.set_connection_timeout(settings.timeout_seconds, 0);
        client.set_read_timeout(settings.timeout_seconds, 0);
        httplib::Headers headers{{"User-Agent", settings.user_agent}};
        auto result = client.Get(path, headers);
        if (!result) throw ToolError("fetch failed: " + httplib::to_string(result.error()));
        if (result->status != 200) {
            throw ToolError("fetch returned status " + std::to_string(result->status) + " for " +
                            url);
        }
        return result->body;
    }
};

LiveWebBackend::LiveWebBackend(LiveWebSettings settings) : impl_(std::make_unique<Impl>()) {
    impl_->settings = std::move(settings);
}

LiveWebBackend::~LiveWebBackend() = default;

std::vector<SearchHit> LiveWebBackend::search(const std::string& query) {
    if (impl_->settings.search_endpoint.empty()) {
        throw ToolError("no search endpoint configured");
    }
    auto url = impl_->settings.search_endpoint;
    url += (url.find('?') == std::string::npos ? "?q=" : "&q=") + url_encode(query);
    if (!impl_->settings.search_api_key.empty()) {
        url += "&key=" + url_encode(impl_->settings.search_api_key);
    }
    auto body = impl_->get(url);

    std::vector<SearchHit> hits;
    try {
        auto j = nlohmann::json::parse(body);
        for (const auto& r : j.at("results")) {
            hits.push_back({r.value("title", std::string{}), r.value("url", std::string{}),
                            r.value("snippet", std::string{})});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ToolError(std::string("unexpected search response shape: ") + e.what());
    }
    return hits;
}

std::string LiveWebBackend::navigate(const std::string& url) {
    auto text = collapse_whitespace(html_to_text(impl_->get(url)));
    if (text.size() > impl_->settings.max_page_chars) {
        text.resize(impl_->settings.max_page_chars);
    }
    std::lock_guard lock(impl_->mutex);
    impl_->last_page = text;
    return text;
}

std::string LiveWebBackend::extract(const std::string& query) {
    std::string page;
    {
        std::lock_guard lock(impl_->mutex);
        page = impl_->last_page;
    }
    if (page.empty()) throw ToolError("extract before any page was navigated");

    // best window by query-token overlap
    auto query_tokens = tokenize(query);
    std::unordered_set<std::string> wanted(query_tokens.begin(), query_tokens.end());

    constexpr std::size_t kWindow = 1200;
    constexpr std::size_t kStride = 600;
    std::size_t best_pos = 0;
    int best_score = -1;
    for (std::size_t pos = 0; pos < page.size(); pos += kStride) {
        auto window = page.substr(pos, kWindow);
        int score = 0;
        for (const auto& token : tokenize(window)) {
            if (wanted.count(token)) ++score;
        }
        if (score > best_score) {
            best_score = score;
            best_pos = pos;
        }
        if (pos + kWindow >= page.size()) break;
    }
    return page.substr(best_pos, kWindow);
}

// ---------------------------------------------------------------------------
// Agent

WebResearchAgent::WebResearchAgent(LlmGateway& gateway, const PromptCatalog& prompts,
                                   std::shared_ptr<WebToolBackend> backend, Blocklist blocklist,
                                   CompletionRequest base_request, AgentOptions options)
    : gateway_(gateway), prompts_(prompts), backend_(std::move(backend)),
      blocklist_(std::move(blocklist)), base_(std::move(base_request)), options_(options) {
    if (!backend_) throw ConfigError("web agent requires a tool backend");
    if (options_.max_steps < 1) throw ConfigError("max_steps must be >= 1");
}

namespace {

std::string coerce_tool(std::string tool) {
    tool = to_lower(trim_copy(tool));
    if (tool == "search" || tool == "navigate" || tool == "extract") return tool;
    return "search"; // unknown kinds degrade to search
}

} // namespace

SearchPlan WebResearchAgent::make_plan(const CaseReport& report, RunRecorder* recorder) {
    auto request = base_;
    request.prompt = prompts_.render(
        "web_plan", {{"case", report.text}, {"max_steps", std::to_string(options_.max_steps)}});
    auto response = gateway_.complete("web", request, recorder);

    SearchPlan plan;
    std::size_t declared_steps = 0;

    auto open = response.text.find('{');
    auto close = response.text.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open) {
        try {
            auto j = nlohmann::json::parse(response.text.substr(open, close - open + 1));
            if (j.contains("queries")) {
                for (const auto& q : j["queries"]) {
                    auto query = trim_copy(q.get<std::string>());
                    if (!query.empty()) plan.queries.push_back(query);
                }
            }
            if (j.contains("tools")) {
                for (const auto& t : j["tools"]) plan.tools.push_back(t.get<std::string>());
            }
            auto declared = j.value("steps", static_cast<long long>(plan.queries.size()));
            declared_steps = declared > 0 ? static_cast<std::size_t>(declared) : 0;
        } catch (const nlohmann::json::exception&) {
            // fall through to the line-based grammar
        }
    }

    if (plan.queries.empty()) {
        // "tool: argument" lines
        std::istringstream lines(response.text);
        std::string line;
        while (std::getline(lines, line)) {
            auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            auto tool = to_lower(trim_copy(line.substr(0, colon)));
            tool.erase(0, tool.find_first_not_of("0123456789.) -*"));
            if (tool != "search" && tool != "navigate" && tool != "extract") continue;
            auto argument = trim_copy(line.substr(colon + 1));
            if (argument.empty()) continue;
            plan.queries.push_back(argument);
            plan.tools.push_back(tool);
        }
        declared_steps = plan.queries.size();
    }

    if (plan.queries.empty()) {
        throw PlanParseError("no query could be extracted from the plan completion");
    }

    auto steps = std::min({declared_steps == 0 ? plan.queries.size() : declared_steps,
                           plan.queries.size(), options_.max_steps});
    plan.queries.resize(steps);
    plan.tools.resize(steps, "search");
    for (auto& tool : plan.tools) tool = coerce_tool(tool);
    return plan;
}

SearchPlan WebResearchAgent::fallback_plan(const CaseReport& report) {
    auto query = collapse_whitespace(report.text);
    if (query.size() > 200) {
        auto cut = query.rfind(' ', 200);
        query.resize(cut == std::string::npos ? 200 : cut);
    }
    SearchPlan plan;
    plan.queries.push_back(query);
    plan.tools.emplace_back("search");
    return plan;
}

ToolInvocation WebResearchAgent::invoke_tool(int step, const std::string& tool,
                                             const std::string& argument) {
    ToolInvocation invocation;
    invocation.step = step;
    invocation.tool = tool;
    invocation.argument = argument;

    if (tool == "navigate") {
        invocation.url = argument;
        if (blocklist_.blocked_url(argument)) {
            invocation.blocked = true;
            return invocation;
        }
    }

    try {
        if (tool == "search") {
            auto hits = backend_->search(argument);
            std::string rendered;
            std::size_t dropped = 0;
            for (const auto& hit : hits) {
                if (blocklist_.blocked_url(hit.url)) {
                    ++dropped;
                    continue;
                }
                rendered += hit.title + "\nURL: " + hit.url + "\n" + hit.snippet + "\n\n";
            }
            if (dropped > 0) {
                rendered += "[" + std::to_string(dropped) + " result(s) from blocked hosts omitted]\n";
            }
            invocation.result = rendered;
        } else if (tool == "navigate") {
            invocation.result = backend_->navigate(argument);
        } else {
            invocation.result = backend_->extract(argument);
        }
    } catch (const ToolError& e) {
        invocation.failed = true;
        invocation.error = e.what();
        invocation.result.clear();
    }
    return invocation;
}

MemoryState WebResearchAgent::update_memory(const MemoryState& memory,
                                            const ToolInvocation& invocation,
                                            RunRecorder* recorder) {
    MemoryState next = memory;
    next.step = static_cast<std::size_t>(invocation.step);

    auto clamp = [this](std::string& text) {
        const std::string marker = "\n[truncated]";
        if (text.size() <= options_.memory_budget_chars) return;
        if (options_.memory_budget_chars <= marker.size()) {
            text.resize(options_.memory_budget_chars);
            return;
        }
        text.resize(options_.memory_budget_chars - marker.size());
        text += marker;
    };

    // Blocked and failed steps leave a one-line note and never cost an LLM call.
    if (invocation.blocked || invocation.failed) {
        std::string note = "[step " + std::to_string(invocation.step) +
                           (invocation.blocked ? " blocked" : " failed") + "]";
        if (!next.evidence.empty()) next.evidence += '\n';
        next.evidence += note;
        clamp(next.evidence);
        return next;
    }

    if (!invocation.url.empty()) next.source_urls.push_back(invocation.url);
    std::istringstream lines(invocation.result);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("URL: ", 0) == 0) next.source_urls.push_back(trim_copy(line.substr(5)));
    }

    auto request = base_;
    request.prompt = prompts_.render(
        "web_memory_update", {{"memory", memory.evidence.empty() ? "(empty)" : memory.evidence},
                              {"result", invocation.result},
                              {"step", std::to_string(invocation.step)}});
    auto response = gateway_.complete("web", request, recorder);
    next.evidence = trim_copy(response.text);
    clamp(next.evidence);
    return next;
}

SourceResult WebResearchAgent::diagnose_from_memory(const CaseReport& report,
                                                    const MemoryState& memory,
                                                    RunRecorder* recorder) {
    auto request = base_;
    request.prompt = prompts_.render(
        "web_diagnosis",
        {{"memory", memory.evidence.empty() ? "[no web evidence was gathered]" : memory.evidence},
         {"case", report.text}});
    auto response = gateway_.complete("web", request, recorder);

    auto parsed = parse_diagnosis_completion(response.text, Source::Web);
    return {std::move(parsed.list), std::move(parsed.reasoning), {}};
}

SourceResult WebResearchAgent::run(const CaseReport& report, RunRecorder* recorder) {
    SearchPlan plan;
    try {
        plan = make_plan(report, recorder);
    } catch (const PlanParseError& e) {
        if (recorder) recorder->add_note(std::string("web: plan fallback: ") + e.what());
        plan = fallback_plan(report);
    }

    MemoryState memory; // m0 is empty
    for (std::size_t i = 0; i < plan.steps(); ++i) {
        auto invocation = invoke_tool(static_cast<int>(i) + 1, plan.tools[i], plan.queries[i]);
        if (recorder) recorder->add_tool(invocation);
        memory = update_memory(memory, invocation, recorder);
    }
    return diagnose_from_memory(report, memory, recorder);
}

} // namespace polydx
