#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace userprof {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument or configuration value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input file could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

/// Remote endpoint failed after all retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Operation conflicts with the current state (double submission, unfinished work, ...).
class Conflict : public Error {
 public:
  using Error::Error;
};

/// Caller is known but may not act on the target.
class Forbidden : public Error {
 public:
  using Error::Error;
};

class Unauthorized : public Error {
 public:
  using Error::Error;
};

/// A per-period quota is exhausted until `reset_at` (Unix seconds).
class QuotaExceeded : public Error {
 public:
  QuotaExceeded(const std::string& what, long long reset_at) : Error(what), reset_at_(reset_at) {}
  long long reset_at() const noexcept { return reset_at_; }

 private:
  long long reset_at_;
};

}  // namespace userprof
