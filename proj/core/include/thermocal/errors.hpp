// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <stdexcept>
#include <string>

namespace thermocal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (e.g. mismatched frame indices).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value, unknown config key, malformed palette.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data is unreadable, malformed or out of range.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Robust temporal estimation could not produce parameters.
class EstimationError : public Error {
 public:
  enum class Kind { DegenerateSet, InvalidScale, EstimationFailed };

  EstimationError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A linear-algebra step failed (singular system, failed factorization).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (empty set, zero variance).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace thermocal
