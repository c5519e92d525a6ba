#pragma once

#include "tabreason/dataset.hpp"
#include "tabreason/gateway.hpp"
#include "tabreason/percent.hpp"
#include "tabreason/prompts.hpp"
#include "tabreason/reasoners.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabreason {

// Canonical answers ---------------------------------------------------------------

struct CanonicalAnswer {
    /// Canonical tokens, sorted.
    std::vector<std::string> items;
    /// Original items joined with ", ".
    std::string display;

    friend bool operator==(const CanonicalAnswer& a, const CanonicalAnswer& b) { return a.items == b.items; }
};

/// NFKC case-folding, trim, strip surrounding quotes and a trailing '.' or '%',
/// collapse whitespace runs. Plain decimal numbers (thousands commas allowed)
/// become their shortest decimal rendering: "1,234.50" -> "1234.5".
std::string canonicalize_item(std::string_view raw);
CanonicalAnswer canonicalize_answer(const std::vector<std::string>& raw);

/// Decimal value of a canonical numeric token.
std::optional<double> numeric_value(std::string_view canonical_item);

/// Multiset equality where numeric tokens match within relative tolerance 1e-6.
bool answers_match(const CanonicalAnswer& a, const CanonicalAnswer& b);

// Voting -------------------------------------------------------------------------

enum class VoteSource { dp, pyagent };

VoteSource vote_source(Method m);

struct Vote {
    CanonicalAnswer answer;
    VoteSource source = VoteSource::dp;
};

struct Tally {
    CanonicalAnswer answer;
    int count = 0;
    int dp_count = 0;
    int py_count = 0;
};

struct VoteResult {
    /// One entry per distinct answer, in order of first appearance.
    std::vector<Tally> tallies;
    CanonicalAnswer winner;
    /// More than one answer shares the best (count, dp_count).
    bool tied = false;
    /// Answers sharing the best (count, dp_count), in order of first appearance.
    std::vector<CanonicalAnswer> tie_set;
};

class EmptyVotes : public std::invalid_argument {
public:
    EmptyVotes() : std::invalid_argument("no votes to count") {}
};
class AllFailed : public std::runtime_error {
public:
    AllFailed() : std::runtime_error("every trace failed") {}
};

/// Highest count wins; equal counts go to the higher DP count; anything still
/// level is a tie whose first member (by first appearance) is the winner.
VoteResult majority_vote(const std::vector<Vote>& votes);

/// Majority over the non-failed traces.
VoteResult self_consistency(const std::vector<ReasoningTrace>& traces);
/// Pools DP traces before agent traces, so DP answers appear first.
VoteResult mix_self_consistency(const std::vector<ReasoningTrace>& dp_traces,
                                const std::vector<ReasoningTrace>& py_traces);

struct TaskVote {
    /// A default-constructed result (every trace failed) scores as wrong.
    VoteResult vote;
    std::vector<std::string> gold;
};

/// Each shuffle resolves every unresolved tie by a uniform draw from its tie
/// set and scores the corpus; the result is the mean over `k_shuffles`. One
/// generator seeded with `seed` is drawn from shuffle by shuffle, visiting
/// tied tasks in order.
Percent tie_average_accuracy(const std::vector<TaskVote>& tasks, int k_shuffles, std::uint64_t seed);

// Self-evaluation ------------------------------------------------------------------

enum class VerdictChoice { A, B };

struct Verdict {
    VerdictChoice choice = VerdictChoice::A;
    std::string raw;
    /// No [[A]]/[[B]] marker was found and A was assumed.
    bool fallback = false;
};

/// Last "[[A]]" or "[[B]]" in the text.
std::optional<VerdictChoice> parse_verdict(std::string_view text);

struct SelfEvalConfig {
    double temperature = 0.0;
    int sample_index = 0;
    int max_output_tokens = 512;
};

/// Answer A is the DP answer, B the agent answer.
Verdict self_evaluate(const Task& task, const std::string& answer_a, const std::string& answer_b,
                      CompletionClient& client, const SelfEvalConfig& cfg = {},
                      const PromptLibrary& prompts = PromptLibrary::bundled());

// Output-selection ablation ----------------------------------------------------------

/// Sampled outputs for one task; nullopt marks a failed trace.
struct SweepTask {
    std::vector<std::optional<CanonicalAnswer>> dp_pool;
    std::vector<std::optional<CanonicalAnswer>> py_pool;
    std::vector<std::string> gold;
};

struct SweepRow {
    int n_dp = 0;
    int n_py = 0;
    Percent max;
    Percent min;
    Percent mean;
};

struct SweepReport {
    std::vector<SweepRow> rows;

    /// "combination,max,min,mean" then one "n_dp+n_py,..." line per row.
    std::string to_csv() const;
};

class InsufficientPool : public std::runtime_error {
public:
    InsufficientPool(const std::string& method, const std::string& what)
        : std::runtime_error(what), method_(method) {}
    const std::string& method() const { return method_; }

private:
    std::string method_;
};

/// For n_dp = total down to 0, draws `trials` subsamples per task (n_dp DP
/// outputs and total - n_dp agent outputs, without replacement), votes with
/// DP priority and breaks leftover ties uniformly. Each combination has its
/// own generator derived from `seed`.
SweepReport ablation_sweep(const std::vector<SweepTask>& tasks, int total, int trials, std::uint64_t seed);

} // namespace tabreason
