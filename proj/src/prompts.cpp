#include "tabreason/prompts.hpp"

#include "tabreason/dataset.hpp"
#include "tabreason/hash.hpp"
#include "tabreason/text.hpp"

#include <cstdlib>

#ifndef TABREASON_DATA_DIR
#define TABREASON_DATA_DIR "data"
#endif

namespace tabreason {

namespace fs = std::filesystem;

namespace {

constexpr std::array<Placeholder, 8> kAllPlaceholders = {
    Placeholder::title,    Placeholder::table,        Placeholder::question,   Placeholder::headings,
    Placeholder::first_row, Placeholder::first_column, Placeholder::cot_answer, Placeholder::agent_answer};

// Digests of the template files as first committed.
constexpr std::array<std::string_view, 7> kPinned = {
    "61fbe2635ba5ebaa932de0c48cfa0e1baef4998a6fd556085fb0f441526228a5", // dp
    "87ce798d74dc514f97bf5f935d537848458006c373f175d3537edf19c5c40a5a", // pyagent
    "decdc6cb323f679a878c20210a70e5b27bdef7b2798e2cb921b6f327b2aa17a3", // transposer
    "987eac2cbab9d5bae0b18688ae734d3437b20cbfea214d6b3324e47f75a73721", // detector
    "b0f0854991c6e478910d9fcb50d45e64eee439173a3de062d0e6514f2960e4dc", // determinator
    "36236191316ebd0d1bf933d81e3b48d00eb8615885e2216bcfbbda3a02528b8c", // resort
    "81a80098f56e1ea1999b9b0a7fa4d3e11e61518fba33926a0746bb54c2603bfc", // self_eval
};

std::map<std::string, std::string> read_manifest(const fs::path& path) {
    std::map<std::string, std::string> out;
    if (!fs::exists(path)) return out;
    for (const auto& line : text::split_lines(read_file(path))) {
        const auto sep = line.find("  ");
        if (sep == std::string::npos) continue;
        out[line.substr(sep + 2)] = line.substr(0, sep);
    }
    return out;
}

} // namespace

std::string_view to_string(TemplateId id) {
    switch (id) {
    case TemplateId::dp: return "dp";
    case TemplateId::pyagent: return "pyagent";
    case TemplateId::transposer: return "transposer";
    case TemplateId::detector: return "detector";
    case TemplateId::determinator: return "determinator";
    case TemplateId::resort: return "resort";
    case TemplateId::self_eval: return "self_eval";
    }
    return "dp";
}

TemplateId parse_template_id(std::string_view name) {
    for (auto id : kAllTemplates) {
        if (to_string(id) == name) return id;
    }
    throw PromptError("unknown template id: " + std::string(name));
}

std::string_view token(Placeholder p) {
    switch (p) {
    case Placeholder::title: return "{[TITLE]}";
    case Placeholder::table: return "{[TABLE]}";
    case Placeholder::question: return "{[QUESTION]}";
    case Placeholder::headings: return "{[HEADINGS]}";
    case Placeholder::first_row: return "{[FIRST_ROW]}";
    case Placeholder::first_column: return "{[FIRST_COLUMN]}";
    case Placeholder::cot_answer: return "{[COT_ANSWER]}";
    case Placeholder::agent_answer: return "{[AGENT_ANSWER]}";
    }
    return "";
}

std::string_view to_string(Placeholder p) {
    auto t = token(p);
    return t.substr(2, t.size() - 4);
}

std::string_view pinned_digest(TemplateId id) { return kPinned.at(static_cast<std::size_t>(id)); }

fs::path PromptLibrary::bundled_dir() {
    if (const char* env = std::getenv("TABREASON_PROMPT_DIR"); env && *env) return env;
    return fs::path(TABREASON_DATA_DIR) / "prompts";
}

const PromptLibrary& PromptLibrary::bundled() {
    static const PromptLibrary lib(bundled_dir());
    return lib;
}

PromptLibrary::PromptLibrary(const fs::path& dir) : dir_(dir) {
    for (auto id : kAllTemplates) {
        const auto path = dir / (std::string(to_string(id)) + ".txt");
        if (!fs::exists(path)) throw PromptError("missing template file " + path.string());
        bodies_[static_cast<std::size_t>(id)] = read_file(path);
    }
}

std::set<Placeholder> PromptLibrary::inventory(TemplateId id) const {
    std::set<Placeholder> out;
    const auto& b = body(id);
    for (auto p : kAllPlaceholders) {
        if (b.find(token(p)) != std::string::npos) out.insert(p);
    }
    return out;
}

std::string PromptLibrary::render(TemplateId id, const Bindings& bindings) const {
    const auto present = inventory(id);
    for (const auto& [p, _] : bindings) {
        if (!present.contains(p)) {
            throw UnknownPlaceholder("template " + std::string(to_string(id)) + " has no placeholder " +
                                     std::string(token(p)));
        }
    }
    for (auto p : present) {
        if (!bindings.contains(p)) {
            throw MissingBinding("template " + std::string(to_string(id)) + " needs a binding for " +
                                 std::string(token(p)));
        }
    }

    const auto& b = body(id);
    std::string out;
    out.reserve(b.size() + 1024);
    std::size_t pos = 0;
    while (pos < b.size()) {
        const auto open = b.find("{[", pos);
        if (open == std::string::npos) break;
        bool replaced = false;
        for (auto p : present) {
            const auto t = token(p);
            if (b.compare(open, t.size(), t) == 0) {
                out.append(b, pos, open - pos);
                out += bindings.at(p);
                pos = open + t.size();
                replaced = true;
                break;
            }
        }
        if (!replaced) {
            out.append(b, pos, open + 2 - pos);
            pos = open + 2;
        }
    }
    out.append(b, pos, std::string::npos);
    return out;
}

std::vector<TemplateReport> PromptLibrary::validate() const {
    const auto manifest = read_manifest(dir_ / "digests.sha256");
    std::vector<TemplateReport> reports;
    std::vector<TemplateId> drifted;
    for (auto id : kAllTemplates) {
        TemplateReport r{id, sha256_hex(body(id)), false, inventory(id)};
        const auto file = std::string(to_string(id)) + ".txt";
        const auto it = manifest.find(file);
        r.matches_pinned = r.digest == pinned_digest(id) && it != manifest.end() && it->second == r.digest;
        if (!r.matches_pinned) drifted.push_back(id);
        reports.push_back(std::move(r));
    }
    if (!drifted.empty()) {
        std::vector<std::string> names;
        for (auto id : drifted) names.emplace_back(to_string(id));
        throw TemplateDrift("template digest mismatch: " + text::join(names, ", "), drifted);
    }
    return reports;
}

} // namespace tabreason
