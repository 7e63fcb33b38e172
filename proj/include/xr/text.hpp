#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xr {

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line);
std::vector<std::string> split(std::string_view line, char delimiter);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Whole-string numeric parses; nullopt on any trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

std::string_view trim(std::string_view text);
bool is_missing_token(std::string_view text);

}  // namespace xr
