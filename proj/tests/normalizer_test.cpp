#include "support/testkit.hpp"

#include "tabreason/normalizer.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace tabreason;
using testkit::ScriptedClient;

namespace {

Table sample() {
    return Table("Olympics", {{"Year", "City", "Nations"},
                              {"1996", "Atlanta", "197"},
                              {"1988", "Seoul", "159"},
                              {"2000", "Sydney", "199"}},
                 Orientation::row_table);
}

std::vector<Table::Row> sorted_data(const Table& t) {
    std::vector<Table::Row> rows(t.cells().begin() + 1, t.cells().end());
    std::sort(rows.begin(), rows.end());
    return rows;
}

} // namespace

TEST(ParseChoice, FirstMarkerWins) {
    EXPECT_EQ(parse_choice("Choice: (B)"), HeadingChoice::first_column);
    EXPECT_EQ(parse_choice("Choice:(C) then Choice: (A)"), HeadingChoice::neither);
    EXPECT_THROW(parse_choice("I pick (A)"), UnparseableChoice);
}

TEST(ParseSort, KeysAndAbsence) {
    EXPECT_EQ(parse_sort("Sort by: [Year], [City]").value(), (std::vector<std::string>{"Year", "City"}));
    EXPECT_TRUE(parse_sort("sort by: N/A")->empty());
    EXPECT_FALSE(parse_sort("No sorting needed").has_value());
}

TEST(ParseTransposeVerdict, LastMarker) {
    EXPECT_TRUE(parse_transpose_verdict("Transpose Recommended: NO\n...\nTranspose Recommended: **YES**"));
    EXPECT_THROW(parse_transpose_verdict("Transpose Recommended: maybe"), UnparseableVerdict);
}

TEST(CompareCells, NumericThenDateThenLexical) {
    EXPECT_LT(compare_cells("9", "10"), 0);
    EXPECT_LT(compare_cells("$1,200", "€3,000"), 0);
    EXPECT_LT(compare_cells("March 3, 1999", "1999-12-01"), 0);
    EXPECT_LT(compare_cells("3 March 1999", "Dec 1, 1999"), 0);
    EXPECT_LT(compare_cells("apple", "Banana"), 0);
    EXPECT_EQ(compare_cells("Rome", "rome"), 0);
    EXPECT_EQ(parse_number_cell("12%").value(), 12.0);
    EXPECT_FALSE(parse_number_cell("12a").has_value());
    EXPECT_FALSE(parse_date_cell("2001-13-01").has_value());
}

TEST(ApplySort, StableMultiKeyAndUnknownKeys) {
    const Table t("t", {{"g", "n"}, {"b", "2"}, {"a", "10"}, {"b", "1"}, {"a", "9"}}, Orientation::row_table);
    std::vector<std::string> warnings;
    const auto s = apply_sort(t, SortSpec{{"g", "n", "missing"}, "", false}, &warnings);
    EXPECT_EQ(s.cells(), (std::vector<Table::Row>{{"g", "n"}, {"a", "9"}, {"a", "10"}, {"b", "1"}, {"b", "2"}}));
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_EQ(apply_sort(t, SortSpec{{"G"}, "", false}).at(1, 1), "10");
    EXPECT_EQ(apply_sort(t, SortSpec{{"n."}, "", false}).at(1, 1), "1");
}

TEST(DetermineOrientation, ShortCircuitsTinyTables) {
    ScriptedClient client([](const CompletionRequest&) { return std::string("Choice: (B)"); });
    const auto c = determine_orientation(Table("t", {{"a", "b"}}), NormContext{client});
    EXPECT_TRUE(c.short_circuited);
    EXPECT_EQ(c.choice, HeadingChoice::first_row);
    EXPECT_TRUE(client.requests.empty());
}

TEST(DetermineOrientation, PromptListsFirstRowAndColumn) {
    ScriptedClient client([](const CompletionRequest&) { return std::string("Choice: (A)"); });
    determine_orientation(sample(), NormContext{client});
    ASSERT_EQ(client.requests.size(), 1u);
    const auto& prompt = client.requests[0].prompt;
    EXPECT_NE(prompt.find("(A) Year | City | Nations\n"), std::string::npos);
    EXPECT_NE(prompt.find("(B) Year | 1996 | 1988 | 2000\n"), std::string::npos);
    EXPECT_EQ(client.requests[0].temperature, 0.0);
}

TEST(Normalize, TransposedTableIsRestoredAndResorted) {
    const auto source = sample();
    ScriptedClient client(
        [&](const CompletionRequest& r) { return testkit::oracle_norm_reply(r, source, "Year"); });
    const auto n = normalize(transpose(source), {}, NormContext{client});
    EXPECT_TRUE(n.trace.transposed);
    EXPECT_TRUE(n.trace.resort_applied);
    EXPECT_EQ(n.table.orientation(), Orientation::row_table);
    EXPECT_EQ(n.table.header(), source.header());
    EXPECT_EQ(n.table.at(1, 0), "1988");
    EXPECT_EQ(n.table.at(3, 0), "2000");
}

TEST(Normalize, NeitherLeavesTableInPlace) {
    ScriptedClient client([](const CompletionRequest& r) {
        return std::string(r.prompt.find("Sort by") != std::string::npos ? "Sort by: N/A" : "Choice: (C)");
    });
    const auto n = normalize(sample(), {}, NormContext{client});
    EXPECT_FALSE(n.trace.transposed);
    EXPECT_FALSE(n.trace.resort_applied);
    EXPECT_EQ(n.table.cells(), sample().cells());
}

TEST(Normalize, UnparseableRepliesFallBack) {
    ScriptedClient client([](const CompletionRequest&) { return std::string("no idea"); });
    const auto n = normalize(sample(), {}, NormContext{client});
    EXPECT_TRUE(n.trace.choice.fallback);
    ASSERT_TRUE(n.trace.sort.has_value());
    EXPECT_TRUE(n.trace.sort->unparseable);
    EXPECT_EQ(n.trace.warnings.size(), 2u);
    EXPECT_EQ(n.table.cells(), sample().cells());
    EXPECT_EQ(n.trace.to_json().at("choice").get<std::string>(), "first_row");
}

TEST(Normalize, ResortOffSkipsSortPrompt) {
    const auto source = sample();
    ScriptedClient client(
        [&](const CompletionRequest& r) { return testkit::oracle_norm_reply(r, source, "Year"); });
    const auto shuffled = shuffle_rows(source, 3);
    const auto n = normalize(shuffled, NormOptions{false}, NormContext{client});
    EXPECT_EQ(client.requests.size(), 1u);
    EXPECT_EQ(n.table.cells(), shuffled.cells());
}

TEST(Normalize, RoundTripProperty) {
    Rng rng(17);
    for (int i = 0; i < 40; ++i) {
        const auto source = testkit::keyed_table(rng, 1 + uniform_below(rng, 10), 2 + uniform_below(rng, 5));
        ScriptedClient client(
            [&](const CompletionRequest& r) { return testkit::oracle_norm_reply(r, source, "h0"); });
        for (auto kind : {PerturbationKind::original, PerturbationKind::row_shuffle, PerturbationKind::transpose,
                          PerturbationKind::transpose_shuffle}) {
            const auto perturbed = perturb(source, {kind, rng()});
            const auto kept = normalize(perturbed, NormOptions{false}, NormContext{client});
            EXPECT_EQ(kept.table.header(), source.header());
            EXPECT_EQ(sorted_data(kept.table), sorted_data(source));
            EXPECT_EQ(normalize(perturbed, {}, NormContext{client}).table, source);
        }
    }
}

TEST(Probes, DetectorAndTransposer) {
    const auto t = sample();
    ScriptedClient yes([](const CompletionRequest&) { return std::string("Transpose Recommended: YES"); });
    EXPECT_TRUE(probe_detect(t, NormContext{yes}));

    ScriptedClient good([&](const CompletionRequest&) { return render_pipe_rows(transpose(t)); });
    const auto graded = probe_transpose(t, NormContext{good});
    EXPECT_TRUE(graded.graded);
    EXPECT_NE(good.requests[0].prompt.find("| Year | City | Nations |"), std::string::npos);

    ScriptedClient lazy([&](const CompletionRequest&) { return render_pipe_rows(t); });
    EXPECT_FALSE(probe_transpose(t, NormContext{lazy}).graded);

    ScriptedClient junk([](const CompletionRequest&) { return std::string("Sorry."); });
    const auto failed = probe_transpose(t, NormContext{junk});
    EXPECT_FALSE(failed.graded);
    EXPECT_FALSE(failed.parsed.has_value());
}
