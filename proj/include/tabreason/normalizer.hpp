#pragma once

#include "tabreason/gateway.hpp"
#include "tabreason/prompts.hpp"
#include "tabreason/table.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabreason {

enum class HeadingChoice { first_row, first_column, neither };

struct OrientationChoice {
    HeadingChoice choice = HeadingChoice::first_row;
    std::string raw;
    /// No gateway call was made (table too small to orient).
    bool short_circuited = false;
    /// The response had no parseable choice line and first_row was assumed.
    bool fallback = false;
};

struct SortSpec {
    std::vector<std::string> keys;
    std::string raw;
    bool unparseable = false;
};

struct NormTrace {
    std::size_t input_rows = 0;
    std::size_t input_cols = 0;
    OrientationChoice choice;
    bool transposed = false;
    std::optional<SortSpec> sort;
    bool resort_applied = false;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

struct NormOptions {
    bool resort = true;
};

class UnparseableChoice : public std::runtime_error {
public:
    explicit UnparseableChoice(const std::string& what, std::string raw = {})
        : std::runtime_error(what), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};
class UnparseableVerdict : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string_view to_string(HeadingChoice c);

/// First match of `Choice:\s*\(([ABC])\)` anywhere in the response.
HeadingChoice parse_choice(std::string_view response);
/// Text after the first "Sort by:" line marker; "N/A" yields no keys.
/// nullopt when no marker is present.
std::optional<std::vector<std::string>> parse_sort(std::string_view response);
/// Value of the last "Transpose Recommended:" marker.
bool parse_transpose_verdict(std::string_view response);

/// Options shared by all normalizer calls.
struct NormContext {
    CompletionClient& client;
    const PromptLibrary& prompts = PromptLibrary::bundled();
    /// Structure decisions are made greedily.
    double temperature = 0.0;
    int max_output_tokens = 256;
};

OrientationChoice determine_orientation(const Table& table, const NormContext& ctx);
SortSpec propose_sort(const Table& table, const NormContext& ctx);

/// Stable sort of data rows. Per key and per pair of cells: numeric when both
/// parse as numbers (commas, percent and currency signs stripped), else date
/// when both parse as dates, else case-insensitive lexical. Unknown keys are
/// skipped and reported through `warnings`.
Table apply_sort(const Table& table, const SortSpec& spec, std::vector<std::string>* warnings = nullptr);

struct Normalized {
    Table table;
    NormTrace trace;
};

Normalized normalize(const Table& table, const NormOptions& opts, const NormContext& ctx);

// Structure probes ------------------------------------------------------------

/// Asks whether the table should be transposed. Throws UnparseableVerdict.
bool probe_detect(const Table& table, const NormContext& ctx);

struct TransposeProbe {
    std::optional<Table> parsed;
    bool graded = false;
    std::string raw;
};

/// Asks the model to transpose the table and grades the reply cell by cell
/// against the true transpose.
TransposeProbe probe_transpose(const Table& table, const NormContext& ctx);

// Exposed for tests.
std::optional<double> parse_number_cell(std::string_view cell);
/// Days-since-epoch-like ordinal for ISO or "Month D, YYYY" dates.
std::optional<long> parse_date_cell(std::string_view cell);
/// <0, 0, >0 under the per-pair comparator precedence.
int compare_cells(std::string_view a, std::string_view b);

} // namespace tabreason
