#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shardbal {

// Base for every error raised by the library. Callers that only care about
// "bad input" versus "bug" can catch this and InvariantViolation separately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Graph is disconnected, too small, or references nodes out of range.
class InvalidTopology : public Error {
 public:
  using Error::Error;
};

// Malformed CSV / decimal / config input. `line()` is 1-based and 0 when the
// error is not tied to a particular input line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Inputs that are well-formed but violate a precondition (unassigned account,
// oracle instance too large, zero shards, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Something that the algorithms guarantee cannot happen did happen.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace shardbal
