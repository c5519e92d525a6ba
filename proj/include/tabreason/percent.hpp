#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tabreason {

/// Percentage held as a whole number of hundredths, so 59.50 is 5950. All
/// rounding into this type is half away from zero.
class Percent {
public:
    constexpr Percent() = default;
    static constexpr Percent from_hundredths(std::int64_t h) { return Percent(h); }

    /// 100 * num / den rounded to hundredths. den must be > 0.
    static Percent from_ratio(std::int64_t num, std::int64_t den);
    /// Parses "59.50", "-12.25", "+346.02", "12.4" or "7". Throws std::invalid_argument.
    static Percent parse(std::string_view text);

    constexpr std::int64_t hundredths() const { return h_; }
    constexpr double value() const { return static_cast<double>(h_) / 100.0; }

    /// Always two decimals; a leading '-' for negatives.
    std::string str() const;
    /// Like str() with an explicit '+' on positive values.
    std::string signed_str() const;

    friend constexpr auto operator<=>(Percent, Percent) = default;

private:
    constexpr explicit Percent(std::int64_t h) : h_(h) {}
    std::int64_t h_ = 0;
};

/// round(num / den) with halves rounded away from zero. den must be > 0.
std::int64_t div_round_half_away(std::int64_t num, std::int64_t den);

} // namespace tabreason
