#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabreason {

enum class TemplateId { dp, pyagent, transposer, detector, determinator, resort, self_eval };

inline constexpr std::array<TemplateId, 7> kAllTemplates = {
    TemplateId::dp,       TemplateId::pyagent, TemplateId::transposer, TemplateId::detector,
    TemplateId::determinator, TemplateId::resort, TemplateId::self_eval};

enum class Placeholder { title, table, question, headings, first_row, first_column, cot_answer, agent_answer };

std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view name);
/// Literal token as it appears in a template, e.g. "{[TITLE]}".
std::string_view token(Placeholder p);
std::string_view to_string(Placeholder p);

using Bindings = std::map<Placeholder, std::string>;

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MissingBinding : public PromptError {
public:
    using PromptError::PromptError;
};
class UnknownPlaceholder : public PromptError {
public:
    using PromptError::PromptError;
};
class TemplateDrift : public PromptError {
public:
    TemplateDrift(const std::string& what, std::vector<TemplateId> drifted)
        : PromptError(what), drifted_(std::move(drifted)) {}
    const std::vector<TemplateId>& drifted() const { return drifted_; }

private:
    std::vector<TemplateId> drifted_;
};

struct TemplateReport {
    TemplateId id;
    std::string digest;
    bool matches_pinned = false;
    std::set<Placeholder> placeholders;
};

/// Read-only set of the seven prompt templates, loaded from a directory
/// holding `<id>.txt` files and a `digests.sha256` manifest.
class PromptLibrary {
public:
    /// Loads every template. Throws PromptError if a file is missing.
    explicit PromptLibrary(const std::filesystem::path& dir);

    /// Library over the templates shipped with the project.
    static const PromptLibrary& bundled();
    static std::filesystem::path bundled_dir();

    const std::string& body(TemplateId id) const { return bodies_.at(static_cast<std::size_t>(id)); }
    std::set<Placeholder> inventory(TemplateId id) const;

    /// Single-pass literal substitution. Bindings must cover exactly the
    /// placeholders present in the template.
    std::string render(TemplateId id, const Bindings& bindings) const;

    /// Compares every template with the pinned digest and the directory's
    /// manifest. Throws TemplateDrift naming each mismatching template.
    std::vector<TemplateReport> validate() const;

private:
    std::filesystem::path dir_;
    std::array<std::string, 7> bodies_;
};

/// SHA-256 digests of the verbatim template texts.
std::string_view pinned_digest(TemplateId id);

} // namespace tabreason
