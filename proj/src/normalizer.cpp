#include "tabreason/normalizer.hpp"

#include "tabreason/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <regex>

namespace tabreason {

std::string_view to_string(HeadingChoice c) {
    switch (c) {
    case HeadingChoice::first_row: return "first_row";
    case HeadingChoice::first_column: return "first_column";
    case HeadingChoice::neither: return "neither";
    }
    return "first_row";
}

nlohmann::json NormTrace::to_json() const {
    nlohmann::json j = {{"input_dims", {input_rows, input_cols}},
                        {"choice", to_string(choice.choice)},
                        {"choice_raw", choice.raw},
                        {"choice_fallback", choice.fallback},
                        {"short_circuited", choice.short_circuited},
                        {"transposed", transposed},
                        {"resort_applied", resort_applied},
                        {"warnings", warnings}};
    if (sort) {
        j["sort_keys"] = sort->keys;
        j["sort_raw"] = sort->raw;
    } else {
        j["sort_keys"] = nullptr;
    }
    return j;
}

// Parsers -----------------------------------------------------------------------

HeadingChoice parse_choice(std::string_view response) {
    static const std::regex re(R"(Choice:\s*\(([ABC])\))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(response.begin(), response.end(), m, re)) {
        throw UnparseableChoice("no \"Choice: (A|B|C)\" in response");
    }
    switch (m[1].str()[0]) {
    case 'A': return HeadingChoice::first_row;
    case 'B': return HeadingChoice::first_column;
    default: return HeadingChoice::neither;
    }
}

std::optional<std::vector<std::string>> parse_sort(std::string_view response) {
    const auto pos = text::ifind(response, "Sort by:");
    if (pos == std::string_view::npos) return std::nullopt;
    auto rest = response.substr(pos + 8);
    rest = rest.substr(0, rest.find('\n'));
    std::string value = text::trim_copy(rest);
    // Models often echo the quoting or brackets of the instruction.
    auto strip = [](std::string& s, std::string_view chars) {
        while (!s.empty() && chars.find(s.front()) != std::string_view::npos) s.erase(s.begin());
        while (!s.empty() && chars.find(s.back()) != std::string_view::npos) s.pop_back();
    };
    strip(value, "\"'`* ");
    std::vector<std::string> keys;
    if (text::iequals(value, "N/A") || text::iequals(value, "NA") || value.empty()) return keys;
    for (auto& part : text::split(value, ",")) {
        std::string key = text::trim_copy(part);
        strip(key, "[]\"'`* ");
        if (!key.empty()) keys.push_back(key);
    }
    return keys;
}

bool parse_transpose_verdict(std::string_view response) {
    const auto pos = text::irfind(response, "Transpose Recommended");
    if (pos == std::string_view::npos) throw UnparseableVerdict("no \"Transpose Recommended\" marker");
    auto rest = response.substr(pos + 21);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) throw UnparseableVerdict("verdict marker without value");
    rest = rest.substr(colon + 1);
    rest = text::trim(rest.substr(0, rest.find('\n')));
    while (!rest.empty() && (rest.front() == '*' || rest.front() == '"')) rest.remove_prefix(1);
    if (text::starts_with_ci(rest, "YES")) return true;
    if (text::starts_with_ci(rest, "NO")) return false;
    throw UnparseableVerdict("verdict is neither YES nor NO: " + std::string(rest));
}

// Cell comparison -------------------------------------------------------------------

std::optional<double> parse_number_cell(std::string_view cell) {
    std::string s;
    for (std::size_t i = 0; i < cell.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(cell[i]);
        if (c == ',' || c == '%' || c == '$' || c == ' ') continue;
        // UTF-8 currency signs: £ (C2 A3), ¥ (C2 A5), € (E2 82 AC)
        if (c == 0xC2 && i + 1 < cell.size() &&
            (static_cast<unsigned char>(cell[i + 1]) == 0xA3 || static_cast<unsigned char>(cell[i + 1]) == 0xA5)) {
            ++i;
            continue;
        }
        if (c == 0xE2 && i + 2 < cell.size() && static_cast<unsigned char>(cell[i + 1]) == 0x82 &&
            static_cast<unsigned char>(cell[i + 2]) == 0xAC) {
            i += 2;
            continue;
        }
        s.push_back(static_cast<char>(c));
    }
    static const std::regex number(R"([+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)");
    if (s.empty() || !std::regex_match(s, number)) return std::nullopt;
    double v = 0;
    const char* begin = s.data() + (s.front() == '+' ? 1 : 0);
    const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

namespace {

constexpr std::array<std::string_view, 12> kMonths = {"january", "february", "march",     "april",
                                                      "may",     "june",     "july",      "august",
                                                      "september", "october", "november", "december"};

int month_number(std::string_view name) {
    const auto lower = text::ascii_lower(name);
    for (std::size_t i = 0; i < kMonths.size(); ++i) {
        if (lower == kMonths[i] || (lower.size() == 3 && kMonths[i].substr(0, 3) == lower)) {
            return static_cast<int>(i) + 1;
        }
    }
    if (lower == "sept") return 9;
    return 0;
}

long ordinal(int y, int m, int d) { return (static_cast<long>(y) * 12 + (m - 1)) * 31 + (d - 1); }

bool valid_date(int m, int d) { return m >= 1 && m <= 12 && d >= 1 && d <= 31; }

} // namespace

std::optional<long> parse_date_cell(std::string_view cell) {
    const std::string s = text::trim_copy(cell);
    std::smatch m;
    static const std::regex iso(R"((\d{4})-(\d{1,2})-(\d{1,2}))");
    static const std::regex month_day_year(R"(([A-Za-z]+)\.?\s+(\d{1,2}),?\s+(\d{4}))");
    static const std::regex day_month_year(R"((\d{1,2})\s+([A-Za-z]+)\.?,?\s+(\d{4}))");
    if (std::regex_match(s, m, iso)) {
        const int y = std::stoi(m[1]), mo = std::stoi(m[2]), d = std::stoi(m[3]);
        if (valid_date(mo, d)) return ordinal(y, mo, d);
        return std::nullopt;
    }
    if (std::regex_match(s, m, month_day_year)) {
        const int mo = month_number(m[1].str()), d = std::stoi(m[2]), y = std::stoi(m[3]);
        if (valid_date(mo, d)) return ordinal(y, mo, d);
        return std::nullopt;
    }
    if (std::regex_match(s, m, day_month_year)) {
        const int d = std::stoi(m[1]), mo = month_number(m[2].str()), y = std::stoi(m[3]);
        if (valid_date(mo, d)) return ordinal(y, mo, d);
    }
    return std::nullopt;
}

int compare_cells(std::string_view a, std::string_view b) {
    if (const auto x = parse_number_cell(a)) {
        if (const auto y = parse_number_cell(b)) return *x < *y ? -1 : (*y < *x ? 1 : 0);
    }
    if (const auto x = parse_date_cell(a)) {
        if (const auto y = parse_date_cell(b)) return *x < *y ? -1 : (*y < *x ? 1 : 0);
    }
    const auto la = text::ascii_lower(text::trim(a));
    const auto lb = text::ascii_lower(text::trim(b));
    return la.compare(lb) < 0 ? -1 : (la == lb ? 0 : 1);
}

namespace {

// Bottom-up merge sort. The per-pair comparator is not transitive on mixed
// columns, so std::stable_sort's strict-weak-ordering contract cannot be met.
template <typename Less>
void merge_sort(std::vector<std::size_t>& order, Less less) {
    std::vector<std::size_t> buf(order.size());
    for (std::size_t width = 1; width < order.size(); width *= 2) {
        for (std::size_t lo = 0; lo < order.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, order.size());
            const std::size_t hi = std::min(lo + 2 * width, order.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) buf[k++] = less(order[j], order[i]) ? order[j++] : order[i++];
            while (i < mid) buf[k++] = order[i++];
            while (j < hi) buf[k++] = order[j++];
        }
        order.swap(buf);
    }
}

std::optional<std::size_t> find_column(const Table::Row& header, const std::string& key) {
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (text::trim(header[c]) == key) return c;
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (text::iequals(text::trim(header[c]), key)) return c;
    }
    // "Sort by: Year." ends the sentence; the period is not part of the name.
    if (key.size() > 1 && key.back() == '.') return find_column(header, key.substr(0, key.size() - 1));
    return std::nullopt;
}

std::string join_cells(const Table::Row& cells, std::string_view delim) { return text::join(cells, delim); }

} // namespace

Table apply_sort(const Table& table, const SortSpec& spec, std::vector<std::string>* warnings) {
    std::vector<std::size_t> columns;
    for (const auto& key : spec.keys) {
        if (auto c = find_column(table.header(), key)) {
            columns.push_back(*c);
        } else {
            spdlog::warn("sort key \"{}\" is not a column of \"{}\"; skipped", key, table.title());
            if (warnings) warnings->push_back("unknown sort key: " + key);
        }
    }
    if (columns.empty() || table.data_rows() < 2) return table;

    std::vector<std::size_t> order(table.data_rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i + 1;
    merge_sort(order, [&](std::size_t x, std::size_t y) {
        for (auto c : columns) {
            const int cmp = compare_cells(table.at(x, c), table.at(y, c));
            if (cmp != 0) return cmp < 0;
        }
        return false;
    });

    std::vector<Table::Row> cells;
    cells.reserve(table.rows());
    cells.push_back(table.header());
    for (auto r : order) cells.push_back(table.row(r));
    return Table(table.title(), std::move(cells), table.orientation());
}

// Gateway-driven stages -----------------------------------------------------------------

namespace {
std::string ask(const NormContext& ctx, std::string prompt) {
    CompletionRequest req;
    req.prompt = std::move(prompt);
    req.temperature = ctx.temperature;
    req.max_output_tokens = ctx.max_output_tokens;
    return ctx.client.complete(req);
}
} // namespace

OrientationChoice determine_orientation(const Table& table, const NormContext& ctx) {
    OrientationChoice out;
    if (table.rows() < 2 || table.cols() < 2) {
        out.short_circuited = true;
        return out;
    }
    const auto prompt = ctx.prompts.render(TemplateId::determinator,
                                           {{Placeholder::title, table.title()},
                                            {Placeholder::table, render_markdown(table)},
                                            {Placeholder::first_row, join_cells(table.header(), " | ")},
                                            {Placeholder::first_column, join_cells(table.first_column(), " | ")}});
    out.raw = ask(ctx, prompt);
    try {
        out.choice = parse_choice(out.raw);
    } catch (const UnparseableChoice& e) {
        throw UnparseableChoice(e.what(), out.raw);
    }
    return out;
}

SortSpec propose_sort(const Table& table, const NormContext& ctx) {
    SortSpec spec;
    const auto prompt = ctx.prompts.render(TemplateId::resort,
                                           {{Placeholder::title, table.title()},
                                            {Placeholder::table, render_markdown(table, TableView::head_tail_3)},
                                            {Placeholder::headings, join_cells(table.header(), "; ")}});
    spec.raw = ask(ctx, prompt);
    if (auto keys = parse_sort(spec.raw)) {
        spec.keys = std::move(*keys);
    } else {
        spec.unparseable = true;
        spdlog::warn("no \"Sort by:\" line in resort response for \"{}\"", table.title());
    }
    return spec;
}

Normalized normalize(const Table& table, const NormOptions& opts, const NormContext& ctx) {
    NormTrace trace;
    trace.input_rows = table.rows();
    trace.input_cols = table.cols();
    try {
        trace.choice = determine_orientation(table, ctx);
    } catch (const UnparseableChoice& e) {
        trace.choice.choice = HeadingChoice::first_row;
        trace.choice.raw = e.raw();
        trace.choice.fallback = true;
        trace.warnings.emplace_back("unparseable orientation choice; kept first row");
        spdlog::warn("unparseable orientation choice for \"{}\"; keeping first row as headings", table.title());
    }
    Table current = table;
    if (trace.choice.choice == HeadingChoice::first_column) {
        current = transpose(table);
        trace.transposed = true;
    }
    current.set_orientation(Orientation::row_table);

    if (opts.resort) {
        auto spec = propose_sort(current, ctx);
        if (spec.unparseable) trace.warnings.emplace_back("unparseable sort proposal; rows left in place");
        current = apply_sort(current, spec, &trace.warnings);
        trace.resort_applied = !spec.keys.empty();
        trace.sort = std::move(spec);
    }
    return {std::move(current), std::move(trace)};
}

bool probe_detect(const Table& table, const NormContext& ctx) {
    const auto prompt = ctx.prompts.render(TemplateId::detector, {{Placeholder::table, render_markdown(table)}});
    return parse_transpose_verdict(ask(ctx, prompt));
}

TransposeProbe probe_transpose(const Table& table, const NormContext& ctx) {
    TransposeProbe out;
    const auto prompt = ctx.prompts.render(TemplateId::transposer, {{Placeholder::table, render_pipe_rows(table)}});
    out.raw = ask(ctx, prompt);
    try {
        out.parsed = parse_table(out.raw, TableFormat::pipe_markdown, IndexColumn::keep);
        out.graded = cells_equal(*out.parsed, transpose(table));
    } catch (const TableError&) {
        out.graded = false;
    }
    return out;
}

} // namespace tabreason
