#include "tabreason/evalkit.hpp"

#include "tabreason/text.hpp"

#include <algorithm>
#include <numeric>

namespace tabreason {

bool exact_match(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (gold.empty()) throw std::invalid_argument("gold answer is empty");
    return answers_match(canonicalize_answer(pred), canonicalize_answer(gold));
}

std::string_view to_string(NormMode m) {
    switch (m) {
    case NormMode::off: return "off";
    case NormMode::full: return "full";
    case NormMode::no_resort: return "no_resort";
    }
    return "off";
}

NormMode parse_norm_mode(std::string_view name) {
    if (name == "off") return NormMode::off;
    if (name == "full") return NormMode::full;
    if (name == "no_resort") return NormMode::no_resort;
    throw std::invalid_argument("unknown norm mode: " + std::string(name));
}

EvalResult evaluate(const std::string& task_id, const std::vector<std::string>& pred,
                    const std::vector<std::string>& gold) {
    EvalResult r;
    r.task_id = task_id;
    r.predicted = canonicalize_answer(pred);
    r.gold = canonicalize_answer(gold);
    r.correct = !gold.empty() && answers_match(r.predicted, r.gold);
    return r;
}

Percent accuracy(std::int64_t correct, std::int64_t total) {
    if (total <= 0) throw EmptyResults();
    return Percent::from_ratio(correct, total);
}

Percent accuracy(const std::vector<EvalResult>& results) {
    const auto correct = std::count_if(results.begin(), results.end(), [](const EvalResult& r) { return r.correct; });
    return accuracy(correct, static_cast<std::int64_t>(results.size()));
}

Percent rel_delta(Percent new_acc, Percent base_acc) {
    if (base_acc.hundredths() == 0) throw ZeroBase();
    // Result in hundredths: 10000 * (new - base) / base, with the sign moved
    // into the numerator so the rounding helper sees a positive denominator.
    std::int64_t num = 10000 * (new_acc.hundredths() - base_acc.hundredths());
    std::int64_t den = base_acc.hundredths();
    if (den < 0) {
        num = -num;
        den = -den;
    }
    return Percent::from_hundredths(div_round_half_away(num, den));
}

std::vector<RowBin> bin_by_rows(const std::vector<Task>& tasks, std::size_t n_bins) {
    if (n_bins == 0) throw std::invalid_argument("n_bins must be positive");
    if (tasks.size() < n_bins)
        throw TooFewTasks(std::to_string(tasks.size()) + " tasks cannot fill " + std::to_string(n_bins) + " bins");
    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return tasks[a].table.data_rows() < tasks[b].table.data_rows(); });

    std::vector<RowBin> bins;
    const std::size_t base = tasks.size() / n_bins;
    const std::size_t extra = tasks.size() % n_bins;
    std::size_t next = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t size = base + (b < extra ? 1 : 0);
        RowBin bin;
        bin.min_rows = tasks[order[next]].table.data_rows();
        bin.max_rows = tasks[order[next + size - 1]].table.data_rows();
        for (std::size_t i = next; i < next + size; ++i) bin.task_ids.push_back(tasks[order[i]].id);
        bin.label = std::to_string(bin.min_rows) + "-" + std::to_string(bin.max_rows);
        next += size;
        bins.push_back(std::move(bin));
    }
    return bins;
}

std::string emit_bin_csv(const std::vector<BinAccuracy>& rows) {
    std::string out = "bin,method,accuracy\n";
    for (const auto& r : rows) out += r.label + "," + r.method + "," + r.accuracy.str() + "\n";
    return out;
}

// Report grid ---------------------------------------------------------------------

namespace {

std::size_t method_rank(const std::string& method) {
    const auto it = std::find(kReportMethods.begin(), kReportMethods.end(), method);
    return static_cast<std::size_t>(it - kReportMethods.begin());
}

constexpr std::array<PerturbationKind, 4> kColumns = {PerturbationKind::original, PerturbationKind::row_shuffle,
                                                      PerturbationKind::transpose,
                                                      PerturbationKind::transpose_shuffle};
constexpr std::array<std::string_view, 4> kColumnNames = {"T", "T_Pi", "T^T", "T^T_Pi"};

using RowKey = std::pair<std::string, NormMode>;

std::vector<RowKey> row_keys(const ReportGrid& grid) {
    std::vector<RowKey> rows;
    for (const auto& [key, _] : grid) {
        RowKey rk{key.method, key.norm};
        if (rows.empty() || rows.back() != rk) rows.push_back(rk);
    }
    return rows;
}

std::optional<Percent> cell(const ReportGrid& grid, const RowKey& row, PerturbationKind p) {
    const auto it = grid.find(GridKey{row.first, p, row.second});
    if (it == grid.end()) return std::nullopt;
    return it->second;
}

std::string delta_cell(std::optional<Percent> value, std::optional<Percent> base) {
    if (!value || !base || base->hundredths() == 0) return "-";
    return rel_delta(*value, *base).signed_str() + "%";
}

std::string markdown_row(const std::vector<std::string>& cells) {
    std::string line = "|";
    for (const auto& c : cells) line += " " + c + " |";
    return line + "\n";
}

} // namespace

bool operator<(const GridKey& a, const GridKey& b) {
    const auto ra = method_rank(a.method);
    const auto rb = method_rank(b.method);
    return std::tie(ra, a.method, a.norm, a.perturbation) < std::tie(rb, b.method, b.norm, b.perturbation);
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "markdown" || name == "md") return ReportFormat::markdown;
    if (name == "csv") return ReportFormat::csv;
    throw std::invalid_argument("unknown report format: " + std::string(name));
}

std::string emit_report(const ReportGrid& grid, ReportFormat format, std::string_view config_hash) {
    std::string out;
    if (format == ReportFormat::csv) {
        if (!config_hash.empty()) out += "# config_hash: " + std::string(config_hash) + "\n";
        out += "method,norm,perturbation,accuracy\n";
        for (const auto& [key, acc] : grid) {
            out += key.method + "," + std::string(to_string(key.norm)) + "," +
                   std::string(to_string(key.perturbation)) + "," + acc.str() + "\n";
        }
        return out;
    }

    if (!config_hash.empty()) out += "<!-- config_hash: " + std::string(config_hash) + " -->\n\n";
    const auto rows = row_keys(grid);

    std::vector<std::string> header = {"Method", "Norm"};
    for (auto name : kColumnNames) header.emplace_back(name);
    for (std::size_t i = 1; i < kColumnNames.size(); ++i) header.push_back("d(" + std::string(kColumnNames[i]) + ")");
    out += markdown_row(header);
    std::vector<std::string> rule = {"---", "---"};
    rule.resize(header.size(), "---:");
    out += markdown_row(rule);
    for (const auto& row : rows) {
        std::vector<std::string> cells = {row.first, std::string(to_string(row.second))};
        const auto base = cell(grid, row, PerturbationKind::original);
        for (auto p : kColumns) {
            const auto v = cell(grid, row, p);
            cells.push_back(v ? v->str() : "-");
        }
        for (std::size_t i = 1; i < kColumns.size(); ++i) cells.push_back(delta_cell(cell(grid, row, kColumns[i]), base));
        out += markdown_row(cells);
    }

    std::vector<std::string> norm_lines;
    for (const auto& row : rows) {
        if (row.second == NormMode::off) continue;
        const RowKey off{row.first, NormMode::off};
        if (std::find(rows.begin(), rows.end(), off) == rows.end()) continue;
        std::vector<std::string> cells = {row.first, std::string(to_string(row.second))};
        for (auto p : kColumns) cells.push_back(delta_cell(cell(grid, row, p), cell(grid, off, p)));
        norm_lines.push_back(markdown_row(cells));
    }
    if (!norm_lines.empty()) {
        out += "\n";
        std::vector<std::string> nheader = {"Method", "Norm"};
        for (auto name : kColumnNames) nheader.push_back("d(" + std::string(name) + ") vs off");
        out += markdown_row(nheader);
        std::vector<std::string> nrule = {"---", "---"};
        nrule.resize(nheader.size(), "---:");
        out += markdown_row(nrule);
        for (const auto& line : norm_lines) out += line;
    }
    return out;
}

ReportGrid parse_report_csv(std::string_view csv) {
    ReportGrid grid;
    bool header_seen = false;
    for (const auto& line : text::split_lines(csv)) {
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            header_seen = true;
            if (line != "method,norm,perturbation,accuracy") throw std::invalid_argument("unexpected report header: " + line);
            continue;
        }
        const auto f = text::split(line, ",");
        if (f.size() != 4) throw std::invalid_argument("malformed report line: " + line);
        grid[GridKey{f[0], parse_perturbation_kind(f[2]), parse_norm_mode(f[1])}] = Percent::parse(f[3]);
    }
    return grid;
}

} // namespace tabreason
