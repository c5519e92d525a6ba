#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared across modules. All functions treat input as
// UTF-8 bytes; only utf8_length and utf8_truncate look at code points.
namespace tabreason::text {

std::string_view trim(std::string_view s);
std::string trim_copy(std::string_view s);

std::vector<std::string> split(std::string_view s, std::string_view delim);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view delim);

std::string ascii_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

/// Position of the first case-insensitive (ASCII) occurrence, or npos.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0);
/// Position of the last case-insensitive (ASCII) occurrence, or npos.
std::size_t irfind(std::string_view haystack, std::string_view needle);

std::string replace_all(std::string_view s, std::string_view from, std::string_view to);

std::size_t utf8_length(std::string_view s);
/// First `max_code_points` code points of s.
std::string utf8_truncate(std::string_view s, std::size_t max_code_points);

bool starts_with_ci(std::string_view s, std::string_view prefix);

} // namespace tabreason::text
