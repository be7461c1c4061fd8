#pragma once

#include <stdexcept>
#include <string>

namespace hyper {

// Base of every error raised by the library. Callers that only care about
// "the run failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A precondition on the call was violated (empty input, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter grid, schedule or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Every layer of an architecture mask is empty.
class DegenerateArchitectureError : public Error {
 public:
  using Error::Error;
};

// Local sampling rejected too many draws in a row.
class SamplingRangeError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; message carries the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Persisted record or feature layout does not match what the reader expects.
class VersionError : public Error {
 public:
  using Error::Error;
};

// AUROC on a single-class label vector.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace hyper
