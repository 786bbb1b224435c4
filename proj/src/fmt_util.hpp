#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace adm::detail {

// Shortest decimal string that round-trips the exact double.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace adm::detail
