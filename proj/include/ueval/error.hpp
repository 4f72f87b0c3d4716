#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ueval {

/// Bad input data: malformed dumps, dimension mismatches, degenerate statistics.
/// The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed line in a JSON Lines file. `line()` is 1-based.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}
  /// Same error located in `file`.
  ParseError(const std::string& file, const ParseError& inner)
      : DataError(file + ": line " + std::to_string(inner.line_) + ": " + inner.detail_),
        line_(inner.line_),
        detail_(inner.detail_) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// A metric needs an input the dump does not carry (logits, features, a fitted density model).
class UnavailableError : public DataError {
 public:
  using DataError::DataError;
};

/// Floating-point result outside its mathematically admissible range.
class NumericalError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid configuration or command-line usage. The CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ueval
