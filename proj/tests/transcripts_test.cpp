#include "support/transcripts.hpp"

#include "tabreason/dataset.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace tabreason;

namespace {

nlohmann::json load_transcripts() {
    return nlohmann::json::parse(read_file(std::string(TABREASON_TEST_DATA) + "/transcripts.json"));
}

} // namespace

TEST(Transcripts, CorpusCoversEveryParser) {
    const auto all = load_transcripts();
    EXPECT_GE(all.size(), 20u);
    std::set<std::string> kinds;
    for (const auto& f : all) kinds.insert(f.at("kind").get<std::string>());
    EXPECT_EQ(kinds, (std::set<std::string>{"final_answer", "agent_step", "choice", "sort", "detector", "verdict"}));
}

TEST(Transcripts, EveryFixtureParsesToItsExpectation) {
    for (const auto& f : load_transcripts())
        EXPECT_EQ(testkit::transcript_mismatch(f), std::nullopt) << f.at("name").get<std::string>();
}

TEST(Transcripts, WrongExpectationsAreReported) {
    const auto f = nlohmann::json::parse(R"j({"name": "x", "kind": "final_answer",
        "input": "Final Answer: 3", "expect": {"answer": ["4"]}})j");
    EXPECT_NE(testkit::transcript_mismatch(f), std::nullopt);
    const auto g = nlohmann::json::parse(R"j({"name": "y", "kind": "choice",
        "input": "Choice: (A)", "expect": {"error": true}})j");
    EXPECT_NE(testkit::transcript_mismatch(g), std::nullopt);
}
