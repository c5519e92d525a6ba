#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace tabreason {

// All randomness in the harness comes from std::mt19937_64, whose output
// sequence is fixed by the standard. Distributions from <random> are not
// portable, so bounded draws and shuffles are implemented here on top of the
// raw 64-bit stream.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % bound;
}

/// Fisher-Yates from the back: for i = n-1 .. 1 swap(i, uniform_below(i+1)).
template <typename T>
void portable_shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

/// Stable 64-bit seed derived from a base seed and a label (e.g. a task id).
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

} // namespace tabreason
