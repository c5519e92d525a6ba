#include "support/testkit.hpp"

#include "tabreason/aggregate.hpp"

#include <gtest/gtest.h>

using namespace tabreason;
using testkit::Ballot;

namespace {

CanonicalAnswer ans(std::string s) { return canonicalize_answer({std::move(s)}); }

std::vector<Vote> to_votes(const std::vector<Ballot>& ballots) {
    std::vector<Vote> votes;
    for (const auto& b : ballots) votes.push_back({ans(std::string(1, b.label)), b.dp ? VoteSource::dp : VoteSource::pyagent});
    return votes;
}

std::string labels(const std::vector<CanonicalAnswer>& answers) {
    std::string out;
    for (const auto& a : answers) out += a.items.at(0);
    return out;
}

ReasoningTrace trace(Method m, std::vector<std::string> answer, bool failed = false) {
    ReasoningTrace t;
    t.method = m;
    t.answer = std::move(answer);
    t.failed = failed;
    return t;
}

TaskVote tie_task(const std::string& first, const std::string& second, const std::string& gold) {
    TaskVote t;
    t.vote = majority_vote({{ans(first), VoteSource::dp}, {ans(second), VoteSource::dp}});
    t.gold = {gold};
    return t;
}

} // namespace

TEST(Canonicalize, Rules) {
    EXPECT_EQ(canonicalize_item("  Rome  "), "rome");
    EXPECT_EQ(canonicalize_item("\"New   York\""), "new york");
    EXPECT_EQ(canonicalize_item("“Paris”."), "paris");
    EXPECT_EQ(canonicalize_item("1,234.50"), "1234.5");
    EXPECT_EQ(canonicalize_item("12.0"), "12");
    EXPECT_EQ(canonicalize_item("007"), "7");
    EXPECT_EQ(canonicalize_item("45%"), "45");
    EXPECT_EQ(canonicalize_item("-0.0"), "0");
    EXPECT_EQ(canonicalize_item(".5"), "0.5");
    EXPECT_EQ(canonicalize_item("Ｒｏｍｅ"), "rome");
    EXPECT_EQ(canonicalize_item("STRASSE"), canonicalize_item("straße"));
    EXPECT_EQ(canonicalize_item("1,23"), "1,23");
}

TEST(Canonicalize, Idempotent) {
    for (const char* raw : {"  \"'12.50%.'\" ", "Ｒｏｍｅ.", "a  b", "1,000,000", "‘x’", "..", "\"\"", "-3."}) {
        const auto once = canonicalize_item(raw);
        EXPECT_EQ(canonicalize_item(once), once) << raw;
    }
}

TEST(Canonicalize, AnswerIsSortedMultiset) {
    const auto a = canonicalize_answer({"b", "A", "a"});
    EXPECT_EQ(a.items, (std::vector<std::string>{"a", "a", "b"}));
    EXPECT_EQ(a.display, "b, A, a");
    EXPECT_EQ(a, canonicalize_answer({"a", "B", "a"}));
}

TEST(AnswersMatch, NumericTolerance) {
    EXPECT_TRUE(answers_match(ans("1000000"), ans("1000000.0000001")));
    EXPECT_FALSE(answers_match(ans("100"), ans("100.1")));
    EXPECT_FALSE(answers_match(canonicalize_answer({"1", "2"}), ans("1")));
    EXPECT_EQ(numeric_value("-2.5").value(), -2.5);
    EXPECT_FALSE(numeric_value("2e5").has_value());
}

TEST(MajorityVote, MatchesBruteForceOracle) {
    std::size_t cases = 0;
    testkit::for_each_ballot_sequence("xyz", 6, [&](const std::vector<Ballot>& ballots) {
        ++cases;
        const auto expected = testkit::oracle_tie_set(ballots);
        const auto got = majority_vote(to_votes(ballots));
        ASSERT_EQ(labels(got.tie_set), expected);
        ASSERT_EQ(got.winner.items.at(0)[0], expected[0]);
        ASSERT_EQ(got.tied, expected.size() > 1);
    });
    EXPECT_EQ(cases, 55986u);
}

TEST(MajorityVote, DpPriorityBreaksEqualCounts) {
    const auto r = majority_vote({{ans("a"), VoteSource::pyagent},
                                  {ans("a"), VoteSource::pyagent},
                                  {ans("b"), VoteSource::dp},
                                  {ans("b"), VoteSource::pyagent}});
    EXPECT_FALSE(r.tied);
    EXPECT_EQ(r.winner, ans("b"));
    ASSERT_EQ(r.tallies.size(), 2u);
    EXPECT_EQ(r.tallies[0].py_count, 2);
    EXPECT_EQ(r.tallies[1].dp_count, 1);
}

TEST(MajorityVote, EmptyThrows) { EXPECT_THROW(majority_vote({}), EmptyVotes); }

TEST(SelfConsistency, SkipsFailedTraces) {
    const auto r = self_consistency({trace(Method::dp, {"x"}), trace(Method::dp, {"y"}, true),
                                     trace(Method::dp, {"y"}, true), trace(Method::dp, {"X."})});
    EXPECT_EQ(r.winner, ans("x"));
    EXPECT_EQ(r.tallies.size(), 1u);
    EXPECT_THROW(self_consistency({trace(Method::dp, {}, true)}), AllFailed);
}

TEST(MixSelfConsistency, DpAnswersComeFirst) {
    const auto r = mix_self_consistency({trace(Method::dp, {"d"})}, {trace(Method::pyagent, {"p"})});
    EXPECT_FALSE(r.tied);
    EXPECT_EQ(r.winner, ans("d"));
    const auto both = mix_self_consistency({trace(Method::dp, {"d"}), trace(Method::dp, {"p"})},
                                           {trace(Method::pyagent, {"p"}), trace(Method::pyagent, {"d"})});
    EXPECT_TRUE(both.tied);
    EXPECT_EQ(both.winner, ans("d"));
}

TEST(MixSelfConsistency, WithoutAgentEqualsDpSelfConsistency) {
    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
        std::vector<ReasoningTrace> pool;
        const auto n = 1 + uniform_below(rng, 10);
        for (std::size_t k = 0; k < n; ++k)
            pool.push_back(trace(Method::dp, {std::string(1, static_cast<char>('a' + uniform_below(rng, 4)))},
                                 uniform_below(rng, 5) == 0));
        pool.push_back(trace(Method::dp, {"a"}));
        const auto sc = self_consistency(pool);
        const auto mix = mix_self_consistency(pool, {});
        EXPECT_EQ(mix.winner, sc.winner);
        EXPECT_EQ(mix.tie_set, sc.tie_set);
        EXPECT_EQ(mix.tied, sc.tied);
    }
}

TEST(TieAverage, UntiedTasksScoreDirectly) {
    TaskVote right;
    right.vote = majority_vote({{ans("a"), VoteSource::dp}});
    right.gold = {"A"};
    TaskVote failed;
    failed.gold = {"a"};
    EXPECT_EQ(tie_average_accuracy({right, failed}, 100, 0).str(), "50.00");
}

TEST(TieAverage, PinnedSeedAndBand) {
    std::vector<TaskVote> tasks;
    for (int i = 0; i < testkit::kTieTasks; ++i) {
        const auto a = "a" + std::to_string(i);
        const auto b = "b" + std::to_string(i);
        tasks.push_back(tie_task(a, b, i % 2 == 0 ? a : b));
    }
    EXPECT_EQ(tie_average_accuracy(tasks, 100, 0).hundredths(), testkit::kTieSeed0Hundredths);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto v = tie_average_accuracy(tasks, 100, seed).hundredths();
        EXPECT_GE(v, 4500);
        EXPECT_LE(v, 5500);
    }
    EXPECT_THROW(tie_average_accuracy(tasks, 0, 0), std::invalid_argument);
}

TEST(ParseVerdict, LastMarker) {
    EXPECT_EQ(parse_verdict("[[A]] no wait [[B]]"), VerdictChoice::B);
    EXPECT_EQ(parse_verdict("[[B]] then [[A]]"), VerdictChoice::A);
    EXPECT_FALSE(parse_verdict("A").has_value());
}

TEST(SelfEvaluate, RendersBothAnswersAndParses) {
    const auto task = testkit::make_task("t", {{"k", "v"}, {"1", "x"}}, "Which v?", {"x"}, "Tiny");
    testkit::ScriptedClient client([](const CompletionRequest&) { return std::string("Verdict: [[B]]"); });
    const auto v = self_evaluate(task, "x", "y, z", client);
    EXPECT_EQ(v.choice, VerdictChoice::B);
    EXPECT_FALSE(v.fallback);
    ASSERT_EQ(client.requests.size(), 1u);
    EXPECT_NE(client.requests[0].prompt.find("Answer A is x.\nAnswer B is y, z."), std::string::npos);
    EXPECT_EQ(client.requests[0].temperature, 0.0);

    testkit::ScriptedClient vague([](const CompletionRequest&) { return std::string("Both fine."); });
    const auto f = self_evaluate(task, "x", "y", vague);
    EXPECT_TRUE(f.fallback);
    EXPECT_EQ(f.choice, VerdictChoice::A);
}

namespace {

SweepTask sweep_task(int dp_right, int py_right, int pool = 10) {
    SweepTask t;
    t.gold = {"g"};
    for (int i = 0; i < pool; ++i) t.dp_pool.push_back(ans(i < dp_right ? "g" : "d" + std::to_string(i)));
    for (int i = 0; i < pool; ++i) t.py_pool.push_back(ans(i < py_right ? "g" : "p" + std::to_string(i)));
    return t;
}

} // namespace

TEST(AblationSweep, ElevenRowsAndDeterministic) {
    const std::vector<SweepTask> tasks = {sweep_task(6, 3), sweep_task(2, 7), sweep_task(0, 0)};
    const auto a = ablation_sweep(tasks, 10, 50, 1);
    ASSERT_EQ(a.rows.size(), 11u);
    EXPECT_EQ(a.rows.front().n_dp, 10);
    EXPECT_EQ(a.rows.back().n_py, 10);
    EXPECT_EQ(a.to_csv(), ablation_sweep(tasks, 10, 50, 1).to_csv());
    EXPECT_EQ(a.to_csv().substr(0, 25), "combination,max,min,mean\n");
    for (const auto& r : a.rows) {
        EXPECT_LE(r.min, r.mean);
        EXPECT_LE(r.mean, r.max);
        EXPECT_LE(r.max.hundredths(), 6667);
    }
}

TEST(AblationSweep, DegeneratePools) {
    const auto r = ablation_sweep({sweep_task(10, 0)}, 10, 5, 0);
    EXPECT_EQ(r.rows.front().mean.str(), "100.00");
    EXPECT_EQ(r.rows.back().mean.str(), "0.00");
    EXPECT_EQ(r.to_csv().find("10+0,100.00,100.00,100.00\n"), 25u);

    SweepTask failing = sweep_task(0, 0);
    for (auto& o : failing.dp_pool) o.reset();
    for (auto& o : failing.py_pool) o.reset();
    EXPECT_EQ(ablation_sweep({failing}, 10, 3, 0).rows[5].max.str(), "0.00");
}

TEST(AblationSweep, InsufficientPoolNamesMethod) {
    auto t = sweep_task(1, 1);
    t.py_pool.resize(4);
    try {
        ablation_sweep({t}, 10, 1, 0);
        FAIL() << "expected InsufficientPool";
    } catch (const InsufficientPool& e) {
        EXPECT_EQ(e.method(), "pyagent");
    }
}
