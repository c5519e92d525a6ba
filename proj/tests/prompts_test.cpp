#include "tabreason/dataset.hpp"
#include "tabreason/hash.hpp"
#include "tabreason/prompts.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace tabreason;
namespace fs = std::filesystem;

namespace {

fs::path copy_bundled(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("tabreason_prompts_" + name);
    fs::remove_all(dir);
    fs::copy(PromptLibrary::bundled_dir(), dir);
    return dir;
}

} // namespace

TEST(Prompts, BundledTemplatesMatchPinnedDigests) {
    const auto reports = PromptLibrary::bundled().validate();
    ASSERT_EQ(reports.size(), kAllTemplates.size());
    for (const auto& r : reports) {
        EXPECT_TRUE(r.matches_pinned) << to_string(r.id);
        EXPECT_EQ(r.digest, sha256_hex(PromptLibrary::bundled().body(r.id)));
    }
}

TEST(Prompts, DpRenderKeepsInstructionVerbatim) {
    const auto out = PromptLibrary::bundled().render(
        TemplateId::dp, {{Placeholder::title, "Medals"}, {Placeholder::table, "| a |"}, {Placeholder::question, "Q?"}});
    EXPECT_NE(out.find("Let's think step by step"), std::string::npos);
    EXPECT_NE(out.find("regarding \"Medals\""), std::string::npos);
    EXPECT_EQ(out.find("{["), std::string::npos);
}

TEST(Prompts, InventoryPerTemplate) {
    const auto& lib = PromptLibrary::bundled();
    EXPECT_EQ(lib.inventory(TemplateId::dp),
              (std::set<Placeholder>{Placeholder::title, Placeholder::table, Placeholder::question}));
    EXPECT_EQ(lib.inventory(TemplateId::self_eval),
              (std::set<Placeholder>{Placeholder::title, Placeholder::table, Placeholder::question,
                                     Placeholder::cot_answer, Placeholder::agent_answer}));
    EXPECT_EQ(lib.inventory(TemplateId::determinator),
              (std::set<Placeholder>{Placeholder::title, Placeholder::table, Placeholder::first_row,
                                     Placeholder::first_column}));
}

TEST(Prompts, MissingAndUnknownBindings) {
    const auto& lib = PromptLibrary::bundled();
    EXPECT_THROW(lib.render(TemplateId::dp, {{Placeholder::title, "t"}, {Placeholder::table, "x"}}), MissingBinding);
    EXPECT_THROW(lib.render(TemplateId::detector, {{Placeholder::table, "x"}, {Placeholder::question, "q"}}),
                 UnknownPlaceholder);
}

TEST(Prompts, SubstitutionIsSinglePass) {
    const auto out = PromptLibrary::bundled().render(
        TemplateId::dp,
        {{Placeholder::title, "{[QUESTION]}"}, {Placeholder::table, "{[TITLE]}"}, {Placeholder::question, "real"}});
    EXPECT_NE(out.find("regarding \"{[QUESTION]}\""), std::string::npos);
    EXPECT_NE(out.find("\n{[TITLE]}\n"), std::string::npos);
}

TEST(Prompts, EditedTemplateIsReportedAsDrift) {
    const auto dir = copy_bundled("drift");
    auto body = read_file(dir / "pyagent.txt");
    body[0] = body[0] == 'Y' ? 'y' : 'Y';
    write_file(dir / "pyagent.txt", body);
    try {
        PromptLibrary(dir).validate();
        FAIL() << "expected TemplateDrift";
    } catch (const TemplateDrift& e) {
        EXPECT_EQ(e.drifted(), std::vector<TemplateId>{TemplateId::pyagent});
    }
}

TEST(Prompts, MissingFileFailsToLoad) {
    const auto dir = copy_bundled("missing");
    fs::remove(dir / "resort.txt");
    EXPECT_THROW(PromptLibrary{dir}, PromptError);
}

TEST(Prompts, TemplateIdNames) {
    for (auto id : kAllTemplates) EXPECT_EQ(parse_template_id(to_string(id)), id);
    EXPECT_THROW(parse_template_id("cot"), PromptError);
}
