#pragma once

#include <stdexcept>
#include <string>

namespace lscm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Structurally invalid data: duplicate keys, gaps in the time index, shape mismatches.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation requires a spatial layout the cube does not have.
class UnsupportedLayoutError : public Error {
 public:
  using Error::Error;
};

/// Estimator could not produce a result from the given data.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Factorization or other numerical failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lscm
