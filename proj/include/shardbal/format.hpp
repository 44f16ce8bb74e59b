#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace shardbal {

// Shortest decimal form that round-trips to the same double. Locale-free, so
// CSV/JSON output is byte-stable.
inline std::string format_real(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

}  // namespace shardbal
