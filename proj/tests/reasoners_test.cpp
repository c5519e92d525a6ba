#include "support/testkit.hpp"

#include "tabreason/reasoners.hpp"

#include <gtest/gtest.h>

using namespace tabreason;
using testkit::EchoSandbox;
using testkit::ScriptedClient;

namespace {

Task medals() {
    std::vector<Table::Row> cells{{"Nation", "Gold"}};
    for (int i = 0; i < 8; ++i) cells.push_back({"N" + std::to_string(i), std::to_string(10 - i)});
    return testkit::make_task("nt-1", cells, "Which nation won most gold?", {"N0"}, "Medals");
}

ScriptedClient sequence(std::vector<std::string> replies) {
    return ScriptedClient([replies = std::move(replies)](const CompletionRequest& r) {
        return replies.at(static_cast<std::size_t>(r.turn));
    });
}

const std::string kAct = "Thought: check\nAction: python_repl_ast\nAction Input: df.shape";

} // namespace

TEST(FinalAnswer, LastLineWinsAndSplitsOnCommaSpace) {
    EXPECT_EQ(parse_final_answer("Final Answer: a\nfinal answer: 1,000, b"),
              (std::vector<std::string>{"1,000", "b"}));
    EXPECT_THROW(parse_final_answer("Final Answer:   "), NoFinalAnswer);
    EXPECT_THROW(parse_final_answer("The answer is 3"), NoFinalAnswer);
}

TEST(AgentStep, ActFinalMalformed) {
    const auto act = std::get<AgentAct>(parse_agent_step(kAct));
    EXPECT_EQ(act.thought, "check");
    EXPECT_EQ(act.action, "python_repl_ast");
    EXPECT_EQ(act.action_input, "df.shape");

    const auto fenced = std::get<AgentAct>(
        parse_agent_step("Action: python_repl_ast\nAction Input: ```python\nx = 1\nx\n```\nObservation: 1"));
    EXPECT_EQ(fenced.action_input, "x = 1\nx");

    EXPECT_EQ(std::get<AgentFinal>(parse_agent_step("Thought: done\nFinal Answer: 7")).answer,
              std::vector<std::string>{"7"});
    EXPECT_TRUE(std::holds_alternative<AgentAct>(parse_agent_step(kAct + "\nFinal Answer: 7")));
    EXPECT_TRUE(std::holds_alternative<AgentMalformed>(parse_agent_step("Action: python_repl_ast")));
    EXPECT_TRUE(std::holds_alternative<AgentMalformed>(parse_agent_step("just text")));
}

TEST(RunDp, ParsesAnswerAndTagsRequest) {
    auto client = ScriptedClient([](const CompletionRequest&) { return std::string("Reasoning.\nFinal Answer: N0"); });
    ReasonerConfig cfg;
    cfg.temperature = 0.8;
    cfg.sample_index = 3;
    const auto t = run_dp(medals(), client, cfg);
    EXPECT_FALSE(t.failed);
    EXPECT_EQ(t.answer, std::vector<std::string>{"N0"});
    EXPECT_EQ(client.requests[0].sample_index, 3);
    EXPECT_EQ(client.requests[0].max_output_tokens, 2048);
    EXPECT_NE(client.requests[0].prompt.find("| 7 | N7 "), std::string::npos);
}

TEST(RunDp, MissingFinalAnswerFailsTrace) {
    auto client = ScriptedClient([](const CompletionRequest&) { return std::string("no idea"); });
    const auto t = run_dp(medals(), client, {});
    EXPECT_TRUE(t.failed);
    EXPECT_EQ(t.failure_reason->rfind("no_final_answer", 0), 0u);
    EXPECT_EQ(ReasoningTrace::from_json(t.to_json()).to_json(), t.to_json());
}

TEST(RunPyagent, OneStepSession) {
    auto client = sequence({kAct + "\nObservation: (99, 99)", "Thought: verified\nFinal Answer: N0"});
    EchoSandbox sandbox;
    sandbox.output = "(8, 2)";
    const auto t = run_pyagent(medals(), sandbox, client, TableView::full, {});
    EXPECT_FALSE(t.failed);
    EXPECT_EQ(t.answer, std::vector<std::string>{"N0"});
    ASSERT_EQ(t.steps.size(), 1u);
    EXPECT_EQ(t.steps[0].observation, "(8, 2)");
    EXPECT_EQ(t.executed_actions(), 1u);
    ASSERT_EQ(client.requests.size(), 2u);
    const auto& second = client.requests[1].prompt;
    EXPECT_TRUE(second.ends_with("Action Input: df.shape\nObservation: (8, 2)\n"));
    EXPECT_EQ(second.find("(99, 99)"), std::string::npos);
    EXPECT_EQ(client.requests[1].turn, 1);
}

TEST(RunPyagent, SixthActionHitsStepBudget) {
    auto client = ScriptedClient([](const CompletionRequest&) { return kAct; });
    EchoSandbox sandbox;
    const auto t = run_pyagent(medals(), sandbox, client, TableView::full, {});
    EXPECT_TRUE(t.failed);
    EXPECT_EQ(t.failure_reason, "step_budget");
    EXPECT_EQ(sandbox.executed, 5);
    EXPECT_EQ(t.executed_actions(), 5u);
    EXPECT_TRUE(t.answer.empty());
}

TEST(RunPyagent, InvalidAndMalformedTurnsCountTowardsTurnCap) {
    auto client = ScriptedClient([](const CompletionRequest& r) {
        return std::string(r.turn % 2 ? "Action: web_search\nAction Input: q" : "hmm");
    });
    EchoSandbox sandbox;
    const auto t = run_pyagent(medals(), sandbox, client, TableView::full, {});
    EXPECT_EQ(t.failure_reason, "turn_budget");
    EXPECT_EQ(sandbox.executed, 0);
    EXPECT_EQ(client.requests.size(), 10u);
    EXPECT_EQ(t.steps[0].observation, kMalformedObservation);
    EXPECT_EQ(t.steps[1].observation, kInvalidActionObservation);
}

TEST(RunPyagent, LongObservationsAreTruncated) {
    auto client = sequence({kAct, "Final Answer: x"});
    EchoSandbox sandbox;
    sandbox.output = std::string(2500, 'z');
    const auto t = run_pyagent(medals(), sandbox, client, TableView::full, {});
    EXPECT_TRUE(t.steps[0].truncated);
    EXPECT_EQ(t.steps[0].observation, std::string(2000, 'z') + std::string(kTruncationMarker));
}

TEST(RunPyagent, GatewayErrorsFailButMissesPropagate) {
    EchoSandbox sandbox;
    auto broken = ScriptedClient([](const CompletionRequest&) -> std::string { throw ProviderError(500, "down"); });
    const auto t = run_pyagent(medals(), sandbox, broken, TableView::full, {});
    EXPECT_TRUE(t.failed);
    EXPECT_EQ(t.failure_reason->rfind("gateway_error", 0), 0u);

    auto missing = ScriptedClient([](const CompletionRequest&) -> std::string { throw FixtureMiss("k"); });
    EXPECT_THROW(run_pyagent(medals(), sandbox, missing, TableView::full, {}), FixtureMiss);
}

TEST(RunPyagent, OmittedViewShowsHeadAndTail) {
    const auto prompt = render_agent_prompt(medals(), TableView::head_tail_3, PromptLibrary::bundled());
    EXPECT_NE(prompt.find("| N2 "), std::string::npos);
    EXPECT_EQ(prompt.find("| N3 "), std::string::npos);
    EXPECT_NE(prompt.find("| ... |"), std::string::npos);
    EXPECT_NE(prompt.find("| N5 "), std::string::npos);
    auto client = sequence({"Final Answer: N0"});
    EchoSandbox sandbox;
    EXPECT_EQ(run_pyagent(medals(), sandbox, client, TableView::head_tail_3, {}).method, Method::pyagent_omitted);
}

TEST(RunPyagent, FuzzedRepliesAlwaysTerminateWithinBudget) {
    Rng rng(99);
    for (int i = 0; i < 300; ++i) {
        auto client = ScriptedClient([&](const CompletionRequest&) { return testkit::fuzz_agent_reply(rng); });
        EchoSandbox sandbox;
        const auto t = run_pyagent(medals(), sandbox, client, TableView::full, {});
        EXPECT_LE(sandbox.executed, 5);
        EXPECT_LE(client.requests.size(), 10u);
        EXPECT_EQ(t.failed, t.answer.empty());
    }
}

TEST(Method, Names) {
    for (auto m : {Method::dp, Method::pyagent, Method::pyagent_omitted}) EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_THROW(parse_method("cot"), std::invalid_argument);
    EXPECT_TRUE(is_agent(Method::pyagent_omitted));
}
