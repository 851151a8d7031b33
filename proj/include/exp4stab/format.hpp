#pragma once

#include <string>
#include <string_view>

namespace exp4stab {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Strict parse of a full decimal string; throws std::invalid_argument.
double parse_double(std::string_view text);

}  // namespace exp4stab
