#include "tabreason/aggregate.hpp"

#include "tabreason/rng.hpp"
#include "tabreason/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <regex>

namespace tabreason {

// Canonical answers ----------------------------------------------------------------

namespace {

std::string nfkc_casefold(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFKCCasefoldInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFKC_Casefold unavailable");
    const auto in = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())));
    const auto out = norm->normalize(in, status);
    if (U_FAILURE(status)) return text::ascii_lower(s);
    std::string result;
    out.toUTF8String(result);
    return result;
}

constexpr std::array<std::string_view, 7> kQuotes = {"\"", "'", "`", "“", "”", "‘", "’"};

std::size_t leading_quote(std::string_view s) {
    for (auto q : kQuotes)
        if (s.substr(0, q.size()) == q) return q.size();
    return 0;
}

std::size_t trailing_quote(std::string_view s) {
    for (auto q : kQuotes)
        if (s.size() >= q.size() && s.substr(s.size() - q.size()) == q) return q.size();
    return 0;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool in_space = false;
    for (char c : text::trim(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += c;
    }
    return out;
}

std::optional<std::string> canonical_number(const std::string& s) {
    static const std::regex pattern(R"(^([+-]?)(\d{1,3}(?:,\d{3})+|\d*)(?:\.(\d*))?$)");
    std::smatch m;
    if (!std::regex_match(s, m, pattern)) return std::nullopt;
    std::string integer = text::replace_all(m[2].str(), ",", "");
    std::string fraction = m[3].str();
    if (integer.empty() && fraction.empty()) return std::nullopt;
    integer.erase(0, std::min(integer.find_first_not_of('0'), integer.size()));
    while (!fraction.empty() && fraction.back() == '0') fraction.pop_back();
    std::string out = integer.empty() ? "0" : integer;
    if (!fraction.empty()) out += "." + fraction;
    if (m[1].str() == "-" && out != "0") out = "-" + out;
    return out;
}

} // namespace

std::string canonicalize_item(std::string_view raw) {
    std::string s = nfkc_casefold(raw);
    for (;;) {
        const std::string before = s;
        s = collapse_whitespace(s);
        if (const auto lq = leading_quote(s), tq = trailing_quote(s); lq && tq && s.size() >= lq + tq)
            s = s.substr(lq, s.size() - lq - tq);
        if (!s.empty() && (s.back() == '.' || s.back() == '%')) s.pop_back();
        if (s == before) break;
    }
    if (auto n = canonical_number(s)) return *n;
    return s;
}

CanonicalAnswer canonicalize_answer(const std::vector<std::string>& raw) {
    CanonicalAnswer out;
    out.display = text::join(raw, ", ");
    out.items.reserve(raw.size());
    for (const auto& item : raw) out.items.push_back(canonicalize_item(item));
    std::sort(out.items.begin(), out.items.end());
    return out;
}

std::optional<double> numeric_value(std::string_view item) {
    static const std::regex pattern(R"(^-?\d+(\.\d+)?$)");
    const std::string s(item);
    if (!std::regex_match(s, pattern)) return std::nullopt;
    return std::strtod(s.c_str(), nullptr);
}

namespace {

bool items_match(const std::string& a, const std::string& b) {
    if (a == b) return true;
    const auto x = numeric_value(a);
    const auto y = numeric_value(b);
    if (!x || !y) return false;
    return std::fabs(*x - *y) <= 1e-6 * std::max(std::fabs(*x), std::fabs(*y));
}

} // namespace

bool answers_match(const CanonicalAnswer& a, const CanonicalAnswer& b) {
    if (a.items.size() != b.items.size()) return false;
    std::vector<bool> used(b.items.size(), false);
    for (const auto& item : a.items) {
        bool found = false;
        for (std::size_t j = 0; j < b.items.size(); ++j) {
            if (!used[j] && items_match(item, b.items[j])) {
                used[j] = found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

// Voting ------------------------------------------------------------------------

VoteSource vote_source(Method m) { return m == Method::dp ? VoteSource::dp : VoteSource::pyagent; }

VoteResult majority_vote(const std::vector<Vote>& votes) {
    if (votes.empty()) throw EmptyVotes();
    VoteResult result;
    std::map<std::vector<std::string>, std::size_t> slot;
    for (const auto& v : votes) {
        auto [it, inserted] = slot.try_emplace(v.answer.items, result.tallies.size());
        if (inserted) result.tallies.push_back({v.answer, 0, 0, 0});
        auto& t = result.tallies[it->second];
        ++t.count;
        (v.source == VoteSource::dp ? t.dp_count : t.py_count) += 1;
    }
    std::pair<int, int> best{-1, -1};
    for (const auto& t : result.tallies) best = std::max(best, std::pair{t.count, t.dp_count});
    for (const auto& t : result.tallies)
        if (std::pair{t.count, t.dp_count} == best) result.tie_set.push_back(t.answer);
    result.winner = result.tie_set.front();
    result.tied = result.tie_set.size() > 1;
    return result;
}

namespace {

void add_votes(const std::vector<ReasoningTrace>& traces, std::vector<Vote>& votes) {
    for (const auto& t : traces)
        if (!t.failed) votes.push_back({canonicalize_answer(t.answer), vote_source(t.method)});
}

} // namespace

VoteResult self_consistency(const std::vector<ReasoningTrace>& traces) {
    std::vector<Vote> votes;
    add_votes(traces, votes);
    if (votes.empty()) throw AllFailed();
    return majority_vote(votes);
}

VoteResult mix_self_consistency(const std::vector<ReasoningTrace>& dp_traces,
                                const std::vector<ReasoningTrace>& py_traces) {
    std::vector<Vote> votes;
    add_votes(dp_traces, votes);
    add_votes(py_traces, votes);
    if (votes.empty()) throw AllFailed();
    return majority_vote(votes);
}

Percent tie_average_accuracy(const std::vector<TaskVote>& tasks, int k_shuffles, std::uint64_t seed) {
    if (k_shuffles < 1) throw std::invalid_argument("k_shuffles must be at least 1");
    if (tasks.empty()) throw std::invalid_argument("no tasks to score");

    struct Prepared {
        bool tied;
        bool winner_correct;
        std::vector<bool> member_correct;
    };
    std::vector<Prepared> prepared;
    prepared.reserve(tasks.size());
    for (const auto& t : tasks) {
        const auto gold = canonicalize_answer(t.gold);
        Prepared p{t.vote.tied, answers_match(t.vote.winner, gold), {}};
        for (const auto& member : t.vote.tie_set) p.member_correct.push_back(answers_match(member, gold));
        prepared.push_back(std::move(p));
    }

    Rng rng(seed);
    std::int64_t correct = 0;
    for (int s = 0; s < k_shuffles; ++s) {
        for (const auto& p : prepared) {
            if (p.tied)
                correct += p.member_correct[uniform_below(rng, p.member_correct.size())] ? 1 : 0;
            else
                correct += p.winner_correct ? 1 : 0;
        }
    }
    return Percent::from_ratio(correct, static_cast<std::int64_t>(k_shuffles) * static_cast<std::int64_t>(tasks.size()));
}

// Self-evaluation --------------------------------------------------------------------

std::optional<VerdictChoice> parse_verdict(std::string_view s) {
    const auto a = s.rfind("[[A]]");
    const auto b = s.rfind("[[B]]");
    if (a == std::string_view::npos && b == std::string_view::npos) return std::nullopt;
    if (b == std::string_view::npos) return VerdictChoice::A;
    if (a == std::string_view::npos) return VerdictChoice::B;
    return a > b ? VerdictChoice::A : VerdictChoice::B;
}

Verdict self_evaluate(const Task& task, const std::string& answer_a, const std::string& answer_b,
                      CompletionClient& client, const SelfEvalConfig& cfg, const PromptLibrary& prompts) {
    CompletionRequest req;
    req.prompt = prompts.render(TemplateId::self_eval, {{Placeholder::title, task.title()},
                                                        {Placeholder::table, render_markdown(task.table)},
                                                        {Placeholder::question, task.question},
                                                        {Placeholder::cot_answer, answer_a},
                                                        {Placeholder::agent_answer, answer_b}});
    req.temperature = cfg.temperature;
    req.sample_index = cfg.sample_index;
    req.max_output_tokens = cfg.max_output_tokens;
    Verdict v;
    v.raw = client.complete(req);
    if (const auto choice = parse_verdict(v.raw)) {
        v.choice = *choice;
    } else {
        v.choice = VerdictChoice::A;
        v.fallback = true;
    }
    return v;
}

// Output-selection ablation ------------------------------------------------------------

namespace {

/// First n entries of a uniformly random permutation of [0, size).
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + uniform_below(rng, size - i)]);
    idx.resize(n);
    return idx;
}

} // namespace

std::string SweepReport::to_csv() const {
    std::string out = "combination,max,min,mean\n";
    for (const auto& r : rows) {
        out += std::to_string(r.n_dp) + "+" + std::to_string(r.n_py) + "," + r.max.str() + "," + r.min.str() +
               "," + r.mean.str() + "\n";
    }
    return out;
}

SweepReport ablation_sweep(const std::vector<SweepTask>& tasks, int total, int trials, std::uint64_t seed) {
    if (total < 1 || trials < 1) throw std::invalid_argument("total and trials must be at least 1");
    if (tasks.empty()) throw std::invalid_argument("no tasks to sweep");
    const auto need = static_cast<std::size_t>(total);
    for (const auto& t : tasks) {
        if (t.dp_pool.size() < need)
            throw InsufficientPool("dp", "dp pool has " + std::to_string(t.dp_pool.size()) + " outputs, need " +
                                             std::to_string(total));
        if (t.py_pool.size() < need)
            throw InsufficientPool("pyagent", "pyagent pool has " + std::to_string(t.py_pool.size()) +
                                                  " outputs, need " + std::to_string(total));
    }
    std::vector<CanonicalAnswer> golds;
    for (const auto& t : tasks) golds.push_back(canonicalize_answer(t.gold));

    SweepReport report;
    const auto n_tasks = static_cast<std::int64_t>(tasks.size());
    for (int n_dp = total; n_dp >= 0; --n_dp) {
        const int n_py = total - n_dp;
        Rng rng(derive_seed(seed, "sweep:" + std::to_string(n_dp) + "+" + std::to_string(n_py)));
        std::int64_t best = -1;
        std::int64_t worst = -1;
        std::int64_t sum = 0;
        for (int trial = 0; trial < trials; ++trial) {
            std::int64_t correct = 0;
            for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
                const auto& t = tasks[ti];
                std::vector<Vote> votes;
                for (auto i : sample_indices(t.dp_pool.size(), static_cast<std::size_t>(n_dp), rng))
                    if (t.dp_pool[i]) votes.push_back({*t.dp_pool[i], VoteSource::dp});
                for (auto i : sample_indices(t.py_pool.size(), static_cast<std::size_t>(n_py), rng))
                    if (t.py_pool[i]) votes.push_back({*t.py_pool[i], VoteSource::pyagent});
                if (votes.empty()) continue;
                const auto vote = majority_vote(votes);
                const auto& chosen =
                    vote.tied ? vote.tie_set[uniform_below(rng, vote.tie_set.size())] : vote.winner;
                if (answers_match(chosen, golds[ti])) ++correct;
            }
            sum += correct;
            best = best < 0 ? correct : std::max(best, correct);
            worst = worst < 0 ? correct : std::min(worst, correct);
        }
        report.rows.push_back({n_dp, n_py, Percent::from_ratio(best, n_tasks), Percent::from_ratio(worst, n_tasks),
                               Percent::from_ratio(sum, n_tasks * trials)});
    }
    return report;
}

} // namespace tabreason
