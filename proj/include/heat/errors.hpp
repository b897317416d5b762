#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace heat {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value (k >= n, eps <= 0, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unknown node id, type name or parameter name.
class LookupError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared, or an optimizer diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of an API contract (backward on a non-scalar, empty neighborhood, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A metric or statistic is undefined for the given input (single-class AUC, ...).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace heat
