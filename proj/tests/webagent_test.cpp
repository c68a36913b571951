#include "polydx/errors.hpp"
#include "polydx/webagent.hpp"

#include "support/doubles.hpp"
#include "support/golden_case.hpp"

#include <doctest.h>

#include <memory>

using namespace polydx;
using namespace polydx::testfix;

namespace {

WebResearchAgent make_agent(LlmGateway& gateway, const PromptCatalog& prompts,
                            std::shared_ptr<WebToolBackend> backend, AgentOptions options = {}) {
    return WebResearchAgent(gateway, prompts, std::move(backend), Blocklist{},
                            CompletionRequest{}, options);
}

} // namespace

TEST_SUITE_BEGIN("webagent");

TEST_CASE("blocklist matches the default leakage hosts and subdomains") {
    Blocklist blocklist;
    CHECK(blocklist.blocked_url("https://pubmed.ncbi.nlm.nih.gov/12345/"));
    CHECK(blocklist.blocked_url("https://huggingface.co/datasets/x"));
    CHECK(blocklist.blocked_url("http://www.huggingface.co/page"));
    CHECK_FALSE(blocklist.blocked_url("https://example.org/huggingface.co"));
    CHECK_FALSE(blocklist.blocked_url("https://nothuggingface.co/x"));

    Blocklist extended({"example.org"});
    CHECK(extended.blocked_url("https://example.org/a"));
    CHECK(extended.blocked_url("https://pubmed.ncbi.nlm.nih.gov/b")); // defaults stay

    CHECK(Blocklist::host_of("https://a.b.c:8080/path?q=1") == "a.b.c");
    CHECK(Blocklist::host_of("no scheme at all") == "no scheme at all");
}

TEST_CASE("make_plan parses a JSON plan") {
    auto client = std::make_shared<ScriptedMockClient>();
    client->on("Produce a short retrieval plan",
               R"(Here is the plan: {"queries": ["q one", "https://x.test/page"],
                  "tools": ["search", "navigate"], "steps": 2})");
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto agent = make_agent(gateway, prompts, std::make_shared<ScriptedWebBackend>());

    auto plan = agent.make_plan(CaseReport{"t", "case text", {}, {}}, nullptr);
    REQUIRE(plan.steps() == 2);
    CHECK(plan.queries[0] == "q one");
    CHECK(plan.tools[1] == "navigate");
}

TEST_CASE("make_plan clamps the step count to max_steps") {
    auto client = std::make_shared<ScriptedMockClient>();
    std::string queries;
    for (int i = 0; i < 50; ++i) queries += "\"query " + std::to_string(i) + "\",";
    queries.pop_back();
    client->on("Produce a short retrieval plan",
               "{\"queries\": [" + queries + "], \"tools\": [], \"steps\": 50}");
    LlmGateway gateway(client);
    PromptCatalog prompts;
    AgentOptions options;
    options.max_steps = 8;
    auto agent = make_agent(gateway, prompts, std::make_shared<ScriptedWebBackend>(), options);

    auto plan = agent.make_plan(CaseReport{"t", "case", {}, {}}, nullptr);
    CHECK(plan.steps() == 8);
    CHECK(plan.tools.size() == 8); // padded with search
    CHECK(plan.tools[7] == "search");
}

TEST_CASE("make_plan coerces unknown tools and accepts the line grammar") {
    auto client = std::make_shared<ScriptedMockClient>();
    client->on("Produce a short retrieval plan",
               R"({"queries": ["a", "b"], "tools": ["browse", "extract"], "steps": 2})");
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto agent = make_agent(gateway, prompts, std::make_shared<ScriptedWebBackend>());
    auto plan = agent.make_plan(CaseReport{"t", "case", {}, {}}, nullptr);
    CHECK(plan.tools[0] == "search"); // "browse" is unknown
    CHECK(plan.tools[1] == "extract");

    auto line_client = std::make_shared<ScriptedMockClient>();
    line_client->on("Produce a short retrieval plan",
                    "1. search: cns lymphoma imaging\n2. navigate: https://x.test/a\n");
    LlmGateway line_gateway(line_client);
    auto line_agent = make_agent(line_gateway, prompts, std::make_shared<ScriptedWebBackend>());
    auto line_plan = line_agent.make_plan(CaseReport{"t", "case", {}, {}}, nullptr);
    REQUIRE(line_plan.steps() == 2);
    CHECK(line_plan.queries[0] == "cns lymphoma imaging");
    CHECK(line_plan.tools[1] == "navigate");
}

TEST_CASE("make_plan failure falls back to a single search") {
    auto client = std::make_shared<ScriptedMockClient>();
    client->on("Produce a short retrieval plan", "I cannot plan this.");
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto agent = make_agent(gateway, prompts, std::make_shared<ScriptedWebBackend>());

    CHECK_THROWS_AS(agent.make_plan(CaseReport{"t", "case", {}, {}}, nullptr), PlanParseError);

    auto fallback = WebResearchAgent::fallback_plan(CaseReport{"t", std::string(400, 'x'), {}, {}});
    REQUIRE(fallback.steps() == 1);
    CHECK(fallback.tools[0] == "search");
    CHECK(fallback.queries[0].size() <= 200);
}

TEST_CASE("invoke_tool blocks navigation to blocklisted hosts without touching the backend") {
    auto backend = std::make_shared<ScriptedWebBackend>();
    auto client = std::make_shared<ScriptedMockClient>();
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto agent = make_agent(gateway, prompts, backend);

    auto invocation = agent.invoke_tool(1, "navigate", "https://pubmed.ncbi.nlm.nih.gov/xyz");
    CHECK(invocation.blocked);
    CHECK(invocation.result.empty());
    CHECK(invocation.url == "https://pubmed.ncbi.nlm.nih.gov/xyz");
    CHECK(backend->total_calls() == 0);
}

TEST_CASE("invoke_tool filters blocked hosts out of search results") {
    auto backend = std::make_shared<ScriptedWebBackend>();
    backend->search_responses["q"] = {
        {"good", "https://reference.test/a", "useful snippet"},
        {"leaky", "https://huggingface.co/datasets/b", "benchmark dump"},
    };
    auto client = std::make_shared<ScriptedMockClient>();
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto agent = make_agent(gateway, prompts, backend);

    auto invocation = agent.invoke_tool(1, "search", "q");
    CHECK_FALSE(invocation.blocked);
    CHECK(invocation.result.find("useful snippet") != std::string::npos);
    CHECK(invocation.result.find("benchmark dump") == std::string::npos);
    CHECK(invocation.result.find("blocked hosts omitted") != std::string::npos);
}

TEST_CASE("invoke_tool folds transport failures into the result") {
    auto backend = std::make_shared<ScriptedWebBackend>(); // nothing scripted
    auto client = std::make_shared<ScriptedMockClient>();
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto agent = make_agent(gateway, prompts, backend);

    auto invocation = agent.invoke_tool(1, "navigate", "https://dead.test/x");
    CHECK(invocation.failed);
    CHECK(invocation.result.empty());
    CHECK_FALSE(invocation.error.empty());
}

TEST_CASE("update_memory folds results through the gateway") {
    auto client = std::make_shared<ScriptedMockClient>();
    client->on("fact A", "fact A");
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto agent = make_agent(gateway, prompts, std::make_shared<ScriptedWebBackend>());

    MemoryState memory; // m0 empty
    CHECK(memory.evidence.empty());

    ToolInvocation invocation;
    invocation.step = 1;
    invocation.tool = "search";
    invocation.result = "fact A";
    auto next = agent.update_memory(memory, invocation, nullptr);
    CHECK(next.evidence == "fact A");
    CHECK(next.step == 1);
}

TEST_CASE("blocked steps append a note without an LLM call") {
    auto client = std::make_shared<ScriptedMockClient>(); // any LLM call would MockMiss
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto agent = make_agent(gateway, prompts, std::make_shared<ScriptedWebBackend>());

    MemoryState memory;
    memory.evidence = "prior evidence";

    ToolInvocation blocked;
    blocked.step = 2;
    blocked.tool = "navigate";
    blocked.blocked = true;
    auto next = agent.update_memory(memory, blocked, nullptr);
    CHECK(next.evidence == "prior evidence\n[step 2 blocked]");
    CHECK(client->call_log().empty());

    ToolInvocation failed;
    failed.step = 3;
    failed.tool = "navigate";
    failed.failed = true;
    auto after_failure = agent.update_memory(next, failed, nullptr);
    CHECK(after_failure.evidence == "prior evidence\n[step 2 blocked]\n[step 3 failed]");
}

TEST_CASE("memory never exceeds its budget") {
    auto client = std::make_shared<ScriptedMockClient>();
    client->on("long finding", std::string(500, 'm'));
    LlmGateway gateway(client);
    PromptCatalog prompts;
    AgentOptions options;
    options.memory_budget_chars = 64;
    auto agent = make_agent(gateway, prompts, std::make_shared<ScriptedWebBackend>(), options);

    ToolInvocation invocation;
    invocation.step = 1;
    invocation.tool = "search";
    invocation.result = "long finding";
    auto next = agent.update_memory(MemoryState{}, invocation, nullptr);
    CHECK(next.evidence.size() <= 64);
    CHECK(next.evidence.find("[truncated]") != std::string::npos);
}

TEST_CASE("recorded backend stores and replays verbatim") {
    auto dir = make_temp_dir("polydx-web");
    RecordedWebBackend writer(dir);
    writer.store_search("cns lymphoma", {{"t", "https://a.test/x", "snippet body"}});
    writer.store_navigate("https://a.test/x", "full page text");
    writer.store_extract("csf profile", "the relevant passage");

    RecordedWebBackend reader(dir);
    auto hits = reader.search("cns lymphoma");
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].snippet == "snippet body");
    CHECK(reader.navigate("https://a.test/x") == "full page text");
    CHECK(reader.extract("csf profile") == "the relevant passage");

    CHECK_THROWS_AS(reader.search("never recorded"), ToolError);
}

TEST_CASE("run replays deterministically end to end") {
    auto dir = make_temp_dir("polydx-golden-web");
    write_golden_web_fixtures(dir);

    auto run_once = [&] {
        auto client = golden_client();
        LlmGateway gateway(client);
        static PromptCatalog prompts;
        WebResearchAgent agent(gateway, prompts, std::make_shared<RecordedWebBackend>(dir),
                               Blocklist{}, CompletionRequest{}, AgentOptions{});
        RunRecorder recorder("web-run");
        auto result = agent.run(golden_case(), &recorder);
        return std::make_pair(result, recorder.snapshot());
    };

    auto [first, first_record] = run_once();
    auto [second, second_record] = run_once();

    REQUIRE(first.list.size() == 10);
    CHECK(first.list.items[2].name == "Primary CNS lymphoma");
    CHECK(first.list.items[2].rank == 3);
    CHECK(to_json(first.list) == to_json(second.list));
    CHECK(first_record.tool_log.size() == second_record.tool_log.size());

    // plan had 5 steps; pubmed and huggingface navigations are blocked
    REQUIRE(first_record.tool_log.size() == 5);
    CHECK(first_record.tool_log[1].blocked);
    CHECK(first_record.tool_log[2].blocked);
    CHECK(first_record.tool_log[1].result.empty());
    for (const auto& invocation : first_record.tool_log) {
        if (!invocation.url.empty() && Blocklist{}.blocked_url(invocation.url)) {
            CHECK(invocation.blocked);
        }
    }
}

TEST_CASE("a failing step does not stop the loop") {
    auto client = std::make_shared<ScriptedMockClient>();
    client->on("Produce a short retrieval plan",
               R"({"queries": ["missing-page", "known"], "tools": ["navigate", "search"],
                   "steps": 2})");
    client->on("found snippet", "memory with snippet");
    client->on("WEB RESEARCH EVIDENCE", "<think>ok</think>\n1. Pneumonia\n");
    LlmGateway gateway(client);
    PromptCatalog prompts;

    auto backend = std::make_shared<ScriptedWebBackend>();
    backend->search_responses["known"] = {{"hit", "https://ok.test/a", "found snippet"}};
    auto agent = make_agent(gateway, prompts, backend);

    RunRecorder recorder("t");
    auto result = agent.run(CaseReport{"t", "case text", {}, {}}, &recorder);
    REQUIRE(result.list.size() == 1);

    auto record = recorder.snapshot();
    REQUIRE(record.tool_log.size() == 2);
    CHECK(record.tool_log[0].failed);  // navigate to unscripted page
    CHECK_FALSE(record.tool_log[1].failed);
}

TEST_CASE("an all-blocked plan still produces a diagnosis from empty memory") {
    auto client = std::make_shared<ScriptedMockClient>();
    client->on("Produce a short retrieval plan",
               R"({"queries": ["https://pubmed.ncbi.nlm.nih.gov/1",
                               "https://huggingface.co/x"],
                   "tools": ["navigate", "navigate"], "steps": 2})");
    client->on("WEB RESEARCH EVIDENCE", "1. Pneumonia\n");
    LlmGateway gateway(client);
    PromptCatalog prompts;
    auto backend = std::make_shared<ScriptedWebBackend>();
    auto agent = make_agent(gateway, prompts, backend);

    RunRecorder recorder("t");
    auto result = agent.run(CaseReport{"t", "case", {}, {}}, &recorder);
    CHECK(result.list.size() == 1);
    CHECK(backend->total_calls() == 0);

    auto record = recorder.snapshot();
    // plan + final diagnosis only; blocked steps cost no LLM calls
    CHECK(record.calls.size() == 2);
    CHECK(record.calls[1].prompt.find("[no web evidence was gathered]") == std::string::npos);
    CHECK(record.calls[1].prompt.find("[step 1 blocked]") != std::string::npos);
}

TEST_CASE("tool invocations never exceed the step budget") {
    auto client = std::make_shared<ScriptedMockClient>();
    std::string queries;
    for (int i = 0; i < 20; ++i) queries += "\"q" + std::to_string(i) + "\",";
    queries.pop_back();
    client->on("Produce a short retrieval plan",
               "{\"queries\": [" + queries + "], \"steps\": 20}");
    client->on("WEB RESEARCH EVIDENCE", "1. Pneumonia\n");
    LlmGateway gateway(client);
    PromptCatalog prompts;
    AgentOptions options;
    options.max_steps = 3;
    auto backend = std::make_shared<ScriptedWebBackend>(); // all searches fail -> noted
    auto agent = make_agent(gateway, prompts, backend, options);

    RunRecorder recorder("t");
    (void)agent.run(CaseReport{"t", "case", {}, {}}, &recorder);
    CHECK(recorder.snapshot().tool_log.size() == 3);
}

TEST_SUITE_END();
