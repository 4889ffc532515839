#pragma once

#include <stdexcept>
#include <string>

namespace r2d {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shapes that do not line up for the requested operation.
struct DimensionError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

// Violated precondition of a public operation.
struct ContractError : Error {
  using Error::Error;
};

// NaN/Inf where finite values are required.
struct NumericError : Error {
  using Error::Error;
};

// A single-use object (e.g. a Tape) was used a second time.
struct ReuseError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Versioned on-disk format could not be read.
struct FormatError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace r2d
