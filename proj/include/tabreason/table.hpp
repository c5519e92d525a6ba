#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tabreason {

enum class Orientation { row_table, column_table, unknown };

/// Rectangular grid of raw text cells. Row 0 holds the headings when the
/// orientation hint is row_table.
class Table {
public:
    using Row = std::vector<std::string>;

    Table() = default;

    /// Throws TableError(ragged_rows / empty_input) when the grid is not a
    /// non-empty rectangle.
    Table(std::string title, std::vector<Row> cells, Orientation hint = Orientation::unknown);

    const std::string& title() const { return title_; }
    void set_title(std::string title) { title_ = std::move(title); }

    const std::vector<Row>& cells() const { return cells_; }
    const Row& row(std::size_t i) const { return cells_.at(i); }
    const std::string& at(std::size_t r, std::size_t c) const { return cells_.at(r).at(c); }

    std::size_t rows() const { return cells_.size(); }
    std::size_t cols() const { return cells_.empty() ? 0 : cells_.front().size(); }
    std::size_t data_rows() const { return rows() == 0 ? 0 : rows() - 1; }

    const Row& header() const { return cells_.at(0); }
    Row first_column() const;

    Orientation orientation() const { return hint_; }
    void set_orientation(Orientation hint) { hint_ = hint; }

    friend bool operator==(const Table&, const Table&) = default;

private:
    std::string title_;
    std::vector<Row> cells_;
    Orientation hint_ = Orientation::unknown;
};

enum class TableErrc { ragged_rows, empty_input, not_row_oriented, unparseable_table };

class TableError : public std::runtime_error {
public:
    TableError(TableErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    TableErrc code() const { return code_; }

private:
    TableErrc code_;
};

enum class TableFormat { pipe_markdown, tsv, csv };

/// How the pipe-markdown parser treats a leading index column.
enum class IndexColumn {
    strip_if_unnamed, ///< drop column 0 when the first header cell is empty
    keep,
};

/// Cells are trimmed and embedded newlines become single spaces. The result
/// always carries Orientation::unknown.
Table parse_table(std::string_view text, TableFormat format,
                  IndexColumn index = IndexColumn::strip_if_unnamed);

enum class TableView { full, head_tail_3 };

/// Dataframe-style pipe markdown: an unnamed integer index column counting
/// data rows from 0, padded columns and an alignment separator line. The
/// head_tail_3 view keeps rows 0..2 and the last three rows with a single
/// all-"..." row between them when there are more than six data rows.
std::string render_markdown(const Table& table, TableView view = TableView::full);

/// One line per row, each starting with '|' and cells separated by " | ".
/// No index column and no separator line.
std::string render_pipe_rows(const Table& table);

Table transpose(const Table& table);

/// Permutes data rows with the portable generator seeded by `seed`; row 0 is
/// left in place. Throws TableError(not_row_oriented) on a column table.
Table shuffle_rows(const Table& table, std::uint64_t seed);

enum class PerturbationKind { original, row_shuffle, transpose, transpose_shuffle };

struct Perturbation {
    PerturbationKind kind = PerturbationKind::original;
    std::uint64_t seed = 0;

    bool shuffles() const {
        return kind == PerturbationKind::row_shuffle || kind == PerturbationKind::transpose_shuffle;
    }
};

Table perturb(const Table& table, const Perturbation& p);

/// Positional comparison after trimming each cell; case-sensitive.
bool cells_equal(const Table& a, const Table& b);

std::string_view to_string(PerturbationKind kind);
/// Accepts the canonical names plus the aliases "none", "shuffle",
/// "transpose_and_shuffle".
PerturbationKind parse_perturbation_kind(std::string_view name);
std::string_view to_string(Orientation o);

} // namespace tabreason
