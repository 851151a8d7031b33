#include "exp4stab/format.hpp"

#include <charconv>
#include <stdexcept>

namespace exp4stab {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || first == last)
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return value;
}

}  // namespace exp4stab
