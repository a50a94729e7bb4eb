#pragma once

#include <stdexcept>
#include <string>

namespace cyst {

// Error hierarchy shared across the library. The CLI maps these onto its
// exit-code contract (config -> 2, numeric abort -> 3, I/O -> 4).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Corrupt or incompatible serialized data (checkpoints, vocab files).
struct FormatError : Error {
  using Error::Error;
};

// NaN/Inf encountered where the training contract forbids it.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace cyst
