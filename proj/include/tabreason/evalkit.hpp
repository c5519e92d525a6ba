#pragma once

#include "tabreason/aggregate.hpp"
#include "tabreason/dataset.hpp"
#include "tabreason/percent.hpp"
#include "tabreason/table.hpp"

#include <array>
#include <compare>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabreason {

/// Canonical multiset equality with numeric tolerance. gold must be non-empty.
bool exact_match(const std::vector<std::string>& pred, const std::vector<std::string>& gold);

enum class NormMode { off, full, no_resort };

std::string_view to_string(NormMode m);
NormMode parse_norm_mode(std::string_view name);

struct EvalResult {
    std::string task_id;
    CanonicalAnswer predicted;
    CanonicalAnswer gold;
    bool correct = false;
    std::string method;
    PerturbationKind perturbation = PerturbationKind::original;
    NormMode norm = NormMode::off;
};

EvalResult evaluate(const std::string& task_id, const std::vector<std::string>& pred,
                    const std::vector<std::string>& gold);

class EmptyResults : public std::invalid_argument {
public:
    EmptyResults() : std::invalid_argument("no results to score") {}
};
class ZeroBase : public std::invalid_argument {
public:
    ZeroBase() : std::invalid_argument("relative delta against a zero baseline") {}
};
class TooFewTasks : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

Percent accuracy(const std::vector<EvalResult>& results);
Percent accuracy(std::int64_t correct, std::int64_t total);

/// 100 * (new - base) / base.
Percent rel_delta(Percent new_acc, Percent base_acc);

struct RowBin {
    std::string label; ///< "<min rows>-<max rows>"
    std::size_t min_rows = 0;
    std::size_t max_rows = 0;
    std::vector<std::string> task_ids;
};

/// Stable sort by data-row count, then contiguous groups whose sizes differ by
/// at most one; the larger groups come first.
std::vector<RowBin> bin_by_rows(const std::vector<Task>& tasks, std::size_t n_bins = 10);

struct BinAccuracy {
    std::string label;
    std::string method;
    Percent accuracy;
};

/// "bin,method,accuracy" lines.
std::string emit_bin_csv(const std::vector<BinAccuracy>& rows);

// Report grid ---------------------------------------------------------------------

/// Row labels in report order; other labels follow alphabetically.
inline constexpr std::array<std::string_view, 7> kReportMethods = {
    "dp", "pyagent", "pyagent_omitted", "dp_sc", "pyagent_sc", "mix_sc", "self_eval"};

struct GridKey {
    std::string method;
    PerturbationKind perturbation = PerturbationKind::original;
    NormMode norm = NormMode::off;

    friend bool operator==(const GridKey&, const GridKey&) = default;
    friend bool operator<(const GridKey& a, const GridKey& b);
};

using ReportGrid = std::map<GridKey, Percent>;

enum class ReportFormat { markdown, csv };

ReportFormat parse_report_format(std::string_view name);

/// Markdown: one row per (method, norm) with the four perturbation accuracies
/// and three deltas against the row's original-table accuracy, followed by a
/// table of deltas against the matching norm=off row when both exist.
/// CSV: long format "method,norm,perturbation,accuracy". Missing cells are "-".
/// A non-empty `config_hash` is embedded as a comment line.
std::string emit_report(const ReportGrid& grid, ReportFormat format, std::string_view config_hash = {});

/// Inverse of the CSV form; '#' lines are skipped.
ReportGrid parse_report_csv(std::string_view csv);

} // namespace tabreason
