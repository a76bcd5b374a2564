#pragma once

#include <stdexcept>
#include <string>

namespace vibloc {

// Base class of everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with the requested operation.
struct DimensionError : Error {
  using Error::Error;
};

// Input outside the mathematical domain of an operation (log of a
// non-positive entry, fraction outside (0, 1], ...).
struct DomainError : Error {
  using Error::Error;
};

// A computation produced or was handed NaN/Inf.
struct NumericError : Error {
  using Error::Error;
};

// Operation called in an invalid object state (dropout backward before
// any train-mode forward, ...).
struct StateError : Error {
  using Error::Error;
};

// Malformed input file: CSV, checkpoint, config.
struct ParseError : Error {
  using Error::Error;
};

// Structurally valid file whose contents do not match expectations
// (unsupported version, mismatched dimensions, unknown key).
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace vibloc
