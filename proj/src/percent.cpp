#include "tabreason/percent.hpp"

#include <cctype>
#include <cstdio>

namespace tabreason {

std::int64_t div_round_half_away(std::int64_t num, std::int64_t den) {
    if (den <= 0) throw std::invalid_argument("denominator must be positive");
    if (num >= 0) return (2 * num + den) / (2 * den);
    return -((2 * -num + den) / (2 * den));
}

Percent Percent::from_ratio(std::int64_t num, std::int64_t den) {
    return Percent(div_round_half_away(num * 10000, den));
}

Percent Percent::parse(std::string_view text) {
    const std::string original(text);
    bool negative = false;
    if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    if (!text.empty() && text.back() == '%') text.remove_suffix(1);
    std::int64_t mantissa = 0;
    std::int64_t scale = 1;
    bool seen_dot = false;
    bool seen_digit = false;
    for (char c : text) {
        if (c == '.' && !seen_dot) {
            seen_dot = true;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            seen_digit = true;
            mantissa = mantissa * 10 + (c - '0');
            if (seen_dot) scale *= 10;
            if (scale > 1'000'000'000'000LL || mantissa > 1'000'000'000'000'000LL)
                throw std::invalid_argument("percent out of range: " + original);
        } else {
            throw std::invalid_argument("not a percentage: " + original);
        }
    }
    if (!seen_digit) throw std::invalid_argument("not a percentage: " + original);
    const auto h = div_round_half_away(mantissa * 100, scale);
    return Percent(negative ? -h : h);
}

std::string Percent::str() const {
    const std::int64_t a = h_ < 0 ? -h_ : h_;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%lld.%02lld", h_ < 0 ? "-" : "", static_cast<long long>(a / 100),
                  static_cast<long long>(a % 100));
    return buf;
}

std::string Percent::signed_str() const { return h_ > 0 ? "+" + str() : str(); }

} // namespace tabreason
