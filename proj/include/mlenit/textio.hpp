#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mlenit {

std::string to_lower(std::string s);
std::string trim(const std::string& s);
std::vector<std::string> split_line(const std::string& line, char delim);

// Strict double parse: the whole field must be consumed; no locale effects.
// Returns nullopt on any syntax error or out-of-range value.
std::optional<double> parse_double(const std::string& field);

// Shortest decimal form that round-trips to the same double; integral values
// keep a trailing ".0" so the type stays visible (e.g. "2.0", "0.75").
std::string format_double(double v);

}  // namespace mlenit
