#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "shardbal/error.hpp"

namespace shardbal {

// Fee amounts are carried as integers scaled by 10^exponent so that load
// sums inside the workload layer are exact.
using Units = std::int64_t;

struct DecimalScale {
  int exponent = 9;  // 1 unit = 1e-9 of the native currency (gwei for ETH)

  Units factor() const {
    Units f = 1;
    for (int i = 0; i < exponent; ++i) f *= 10;
    return f;
  }

  double to_real(Units u) const {
    return static_cast<double>(u) / static_cast<double>(factor());
  }

  friend bool operator==(const DecimalScale&, const DecimalScale&) = default;
};

inline void validate(const DecimalScale& s) {
  if (s.exponent < 0 || s.exponent > 18)
    throw DataError("decimal exponent must be in [0, 18], got " +
                    std::to_string(s.exponent));
}

// Parses a plain non-negative decimal ("12", "0.003", ".5", "7.") into scaled
// units. Digits past the scale are accepted only when they are zeros; a
// leading '-' is reported separately so callers can give a precise message.
inline Units parse_decimal(std::string_view text, const DecimalScale& scale) {
  validate(scale);
  if (text.empty()) throw ParseError("empty decimal");
  if (text.front() == '-') throw ParseError("negative value '" + std::string(text) + "'");
  if (text.front() == '+') text.remove_prefix(1);

  constexpr Units kMax = std::numeric_limits<Units>::max();
  Units integral = 0;
  Units fraction = 0;
  int fraction_digits = 0;
  bool seen_point = false;
  bool any_digit = false;

  for (char c : text) {
    if (c == '.') {
      if (seen_point) throw ParseError("malformed decimal '" + std::string(text) + "'");
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') throw ParseError("malformed decimal '" + std::string(text) + "'");
    any_digit = true;
    const int d = c - '0';
    if (!seen_point) {
      if (integral > (kMax - d) / 10)
        throw ParseError("decimal out of range '" + std::string(text) + "'");
      integral = integral * 10 + d;
    } else if (fraction_digits < scale.exponent) {
      fraction = fraction * 10 + d;
      ++fraction_digits;
    } else if (d != 0) {
      throw ParseError("decimal '" + std::string(text) + "' exceeds " +
                       std::to_string(scale.exponent) + " fractional digits");
    }
  }
  if (!any_digit) throw ParseError("malformed decimal '" + std::string(text) + "'");

  for (; fraction_digits < scale.exponent; ++fraction_digits) fraction *= 10;
  const Units f = scale.factor();
  if (integral > (kMax - fraction) / f)
    throw ParseError("decimal out of range '" + std::string(text) + "'");
  return integral * f + fraction;
}

// Inverse of parse_decimal: always prints exactly `exponent` fractional digits.
inline std::string format_decimal(Units value, const DecimalScale& scale) {
  validate(scale);
  std::string out;
  const bool negative = value < 0;
  // Work in unsigned to survive INT64_MIN.
  std::uint64_t mag = negative ? 0 - static_cast<std::uint64_t>(value)
                               : static_cast<std::uint64_t>(value);
  const auto f = static_cast<std::uint64_t>(scale.factor());
  std::string whole = std::to_string(mag / f);
  if (negative) out.push_back('-');
  out += whole;
  if (scale.exponent > 0) {
    std::string frac = std::to_string(mag % f);
    out.push_back('.');
    out.append(static_cast<std::size_t>(scale.exponent) - frac.size(), '0');
    out += frac;
  }
  return out;
}

inline Units checked_add(Units a, Units b) {
  Units r;
  if (__builtin_add_overflow(a, b, &r)) throw DataError("load sum overflows 64-bit units");
  return r;
}

}  // namespace shardbal
