#include "tabreason/table.hpp"

#include "tabreason/rng.hpp"
#include "tabreason/text.hpp"

#include <algorithm>
#include <numeric>
#include <span>

namespace tabreason {

namespace {

std::string clean_cell(std::string_view raw) {
    std::string cell;
    cell.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char c = raw[i];
        if (c == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') continue;
        cell.push_back(c == '\n' || c == '\r' ? ' ' : c);
    }
    return text::trim_copy(cell);
}

void require_rectangular(const std::vector<Table::Row>& cells) {
    if (cells.empty() || cells.front().empty()) throw TableError(TableErrc::empty_input, "table has no cells");
    const auto width = cells.front().size();
    for (std::size_t r = 0; r < cells.size(); ++r) {
        if (cells[r].size() != width) {
            throw TableError(TableErrc::ragged_rows, "row " + std::to_string(r) + " has " +
                                                         std::to_string(cells[r].size()) + " cells, expected " +
                                                         std::to_string(width));
        }
    }
}

// Splits one markdown row on unescaped pipes. The outer pipes are optional.
std::vector<std::string> split_pipe_row(std::string_view line) {
    line = text::trim(line);
    if (!line.empty() && line.front() == '|') line.remove_prefix(1);
    if (!line.empty() && line.back() == '|' && !(line.size() >= 2 && line[line.size() - 2] == '\\')) {
        line.remove_suffix(1);
    }
    std::vector<std::string> cells;
    std::string current;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && i + 1 < line.size() && line[i + 1] == '|') {
            current.push_back('|');
            ++i;
        } else if (line[i] == '|') {
            cells.push_back(text::trim_copy(current));
            current.clear();
        } else {
            current.push_back(line[i]);
        }
    }
    cells.push_back(text::trim_copy(current));
    return cells;
}

/// Dash cells with optional alignment colons. At least one cell must carry a
/// colon or three dashes so a data row of "-" placeholders is not swallowed.
bool is_separator_row(const std::vector<std::string>& cells) {
    bool marked = false;
    for (const auto& cell : cells) {
        std::string_view c = cell;
        if (!c.empty() && c.front() == ':') c.remove_prefix(1), marked = true;
        if (!c.empty() && c.back() == ':') c.remove_suffix(1), marked = true;
        if (c.empty() || c.find_first_not_of('-') != std::string_view::npos) return false;
        if (c.size() >= 3) marked = true;
    }
    return marked;
}

Table parse_pipe(std::string_view input, IndexColumn index) {
    std::vector<Table::Row> rows;
    bool any_line = false;
    for (const auto& line : text::split_lines(input)) {
        const auto trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        any_line = true;
        if (trimmed.find('|') == std::string_view::npos) continue;
        auto cells = split_pipe_row(trimmed);
        if (rows.size() == 1 && is_separator_row(cells)) continue;
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) {
        if (!any_line) throw TableError(TableErrc::empty_input, "empty table text");
        throw TableError(TableErrc::unparseable_table, "no pipe-delimited rows found");
    }
    require_rectangular(rows);
    if (index == IndexColumn::strip_if_unnamed && rows.front().size() > 1 && rows.front().front().empty()) {
        for (auto& r : rows) r.erase(r.begin());
    }
    return Table({}, std::move(rows));
}

Table parse_tsv(std::string_view input) {
    std::vector<Table::Row> rows;
    for (const auto& line : text::split_lines(input)) {
        if (text::trim(line).empty()) continue;
        Table::Row row;
        for (const auto& cell : text::split(line, "\t")) row.push_back(clean_cell(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw TableError(TableErrc::empty_input, "empty table text");
    require_rectangular(rows);
    return Table({}, std::move(rows));
}

// RFC 4180 with quoted fields; newlines inside quotes are folded to spaces.
Table parse_csv(std::string_view input) {
    std::vector<Table::Row> rows;
    Table::Row row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    auto end_field = [&] {
        row.push_back(clean_cell(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        if (row_has_content || row.size() > 1) rows.push_back(std::move(row));
        row.clear();
        row_has_content = false;
    };
    for (std::size_t i = 0; i < input.size(); ++i) {
        const char c = input[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < input.size() && input[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            row_has_content = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            continue;
        } else {
            field.push_back(c);
            if (c != ' ' && c != '\t') row_has_content = true;
        }
    }
    if (!field.empty() || !row.empty() || row_has_content) end_row();
    if (rows.empty()) throw TableError(TableErrc::empty_input, "empty table text");
    require_rectangular(rows);
    return Table({}, std::move(rows));
}

std::string escape_pipes(std::string_view cell) { return text::replace_all(cell, "|", "\\|"); }

std::string pad(const std::string& s, std::size_t width, bool right_align) {
    const auto len = text::utf8_length(s);
    if (len >= width) return s;
    const std::string fill(width - len, ' ');
    return right_align ? fill + s : s + fill;
}

} // namespace

Table::Table(std::string title, std::vector<Row> cells, Orientation hint)
    : title_(std::move(title)), cells_(std::move(cells)), hint_(hint) {
    require_rectangular(cells_);
}

Table::Row Table::first_column() const {
    Row col;
    col.reserve(rows());
    for (const auto& r : cells_) col.push_back(r.front());
    return col;
}

Table parse_table(std::string_view input, TableFormat format, IndexColumn index) {
    if (text::trim(input).empty()) throw TableError(TableErrc::empty_input, "empty table text");
    switch (format) {
    case TableFormat::pipe_markdown: return parse_pipe(input, index);
    case TableFormat::tsv: return parse_tsv(input);
    case TableFormat::csv: return parse_csv(input);
    }
    throw TableError(TableErrc::unparseable_table, "unknown table format");
}

std::string render_markdown(const Table& table, TableView view) {
    const std::size_t data = table.data_rows();
    const bool elide = view == TableView::head_tail_3 && data > 6;

    // (index label, grid row); grid row 0 marks the ellipsis row.
    std::vector<std::pair<std::string, std::size_t>> body;
    for (std::size_t i = 0; i < data; ++i) {
        if (elide && i == 3) body.emplace_back("...", 0);
        if (elide && i >= 3 && i < data - 3) continue;
        body.emplace_back(std::to_string(i), i + 1);
    }

    const std::size_t ncols = table.cols();
    std::vector<std::vector<std::string>> escaped(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (const auto& c : table.row(r)) escaped[r].push_back(escape_pipes(c));
    }

    std::size_t index_width = 1;
    for (const auto& [label, _] : body) index_width = std::max(index_width, text::utf8_length(label));
    std::vector<std::size_t> widths(ncols, 3);
    for (std::size_t c = 0; c < ncols; ++c) {
        widths[c] = std::max(widths[c], text::utf8_length(escaped[0][c]));
        for (std::size_t i = 0; i < data; ++i) {
            if (elide && i >= 3 && i < data - 3) continue;
            widths[c] = std::max(widths[c], text::utf8_length(escaped[i + 1][c]));
        }
    }

    std::string out;
    out += "| " + pad("", index_width, true) + " |";
    for (std::size_t c = 0; c < ncols; ++c) out += " " + pad(escaped[0][c], widths[c], false) + " |";
    out += "\n|" + std::string(index_width + 1, '-') + ":|";
    for (std::size_t c = 0; c < ncols; ++c) out += ":" + std::string(widths[c] + 1, '-') + "|";
    for (const auto& [label, row] : body) {
        out += "\n| " + pad(label, index_width, true) + " |";
        for (std::size_t c = 0; c < ncols; ++c) {
            const std::string cell = row ? escaped[row][c] : "...";
            out += " " + pad(cell, widths[c], false) + " |";
        }
    }
    return out;
}

std::string render_pipe_rows(const Table& table) {
    std::string out;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (r) out += '\n';
        out += '|';
        for (const auto& cell : table.row(r)) out += " " + escape_pipes(cell) + " |";
    }
    return out;
}

Table transpose(const Table& table) {
    std::vector<Table::Row> cells(table.cols(), Table::Row(table.rows()));
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < table.cols(); ++c) cells[c][r] = table.at(r, c);
    }
    Orientation hint = table.orientation();
    if (hint == Orientation::row_table) hint = Orientation::column_table;
    else if (hint == Orientation::column_table) hint = Orientation::row_table;
    return Table(table.title(), std::move(cells), hint);
}

Table shuffle_rows(const Table& table, std::uint64_t seed) {
    if (table.orientation() == Orientation::column_table) {
        throw TableError(TableErrc::not_row_oriented, "cannot shuffle rows of a column table");
    }
    auto cells = table.cells();
    if (cells.size() > 2) {
        Rng rng(seed);
        portable_shuffle(std::span<Table::Row>(cells).subspan(1), rng);
    }
    return Table(table.title(), std::move(cells), table.orientation());
}

Table perturb(const Table& table, const Perturbation& p) {
    if (table.orientation() == Orientation::column_table) {
        throw TableError(TableErrc::not_row_oriented, "perturbations apply to row tables");
    }
    switch (p.kind) {
    case PerturbationKind::original: return table;
    case PerturbationKind::row_shuffle: return shuffle_rows(table, p.seed);
    case PerturbationKind::transpose: return transpose(table);
    case PerturbationKind::transpose_shuffle: return transpose(shuffle_rows(table, p.seed));
    }
    return table;
}

bool cells_equal(const Table& a, const Table& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            if (text::trim(a.at(r, c)) != text::trim(b.at(r, c))) return false;
        }
    }
    return true;
}

std::string_view to_string(PerturbationKind kind) {
    switch (kind) {
    case PerturbationKind::original: return "original";
    case PerturbationKind::row_shuffle: return "row_shuffle";
    case PerturbationKind::transpose: return "transpose";
    case PerturbationKind::transpose_shuffle: return "transpose_shuffle";
    }
    return "original";
}

PerturbationKind parse_perturbation_kind(std::string_view name) {
    if (name == "original" || name == "none") return PerturbationKind::original;
    if (name == "row_shuffle" || name == "shuffle") return PerturbationKind::row_shuffle;
    if (name == "transpose") return PerturbationKind::transpose;
    if (name == "transpose_shuffle" || name == "transpose_and_shuffle") return PerturbationKind::transpose_shuffle;
    throw std::invalid_argument("unknown perturbation kind: " + std::string(name));
}

std::string_view to_string(Orientation o) {
    switch (o) {
    case Orientation::row_table: return "row_table";
    case Orientation::column_table: return "column_table";
    case Orientation::unknown: return "unknown";
    }
    return "unknown";
}

} // namespace tabreason
