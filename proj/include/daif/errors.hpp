#pragma once

#include <stdexcept>
#include <string>

namespace daif {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated operation preconditions (empty input, index out of range, ...).
struct ContractError : Error {
  using Error::Error;
};

// Incompatible tensor/matrix shapes. Messages name both shapes.
struct ShapeError : ContractError {
  using ContractError::ContractError;
};

// Bad configuration: unknown keys, invalid values, checkpoint mismatches.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input data: ragged CSV rows, non-numeric cells, NaN inputs.
struct DataError : Error {
  using Error::Error;
};

// Unreadable or unwritable files.
struct IoError : Error {
  using Error::Error;
};

// Numeric failure during computation, e.g. training divergence.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace daif
