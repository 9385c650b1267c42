#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccdet::text {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);

// RFC 4180 quoting where needed.
std::string csv_escape(std::string_view field);
std::vector<std::string> csv_split(std::string_view line);

std::string trim(std::string_view s);

}  // namespace ccdet::text
