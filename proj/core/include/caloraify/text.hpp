#pragma once

#include <string>
#include <string_view>
#include <vector>

// ASCII-only helpers. Bytes >= 0x80 pass through untouched, so UTF-8 text survives.
namespace caloraify::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
/// Lowercase, trim, and collapse inner whitespace runs to a single space.
std::string normalize_name(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool has_alnum(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Fixed-point rendering with `decimals` digits after the point.
std::string format_fixed(double v, int decimals);
/// Parse a full decimal token; returns false unless the whole token was consumed.
bool parse_double(std::string_view token, double& out);

}  // namespace caloraify::text
