#pragma once

#include <stdexcept>
#include <string>

namespace cmtssl {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed container, sidecar, or payload length mismatch.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, out-of-range labels, target entries outside {0,1}.
class DataError : public Error {
 public:
  using Error::Error;
};

// Tensor dimension mismatches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Inputs that make the requested quantity undefined (zero variance,
// empty mask, empty confusion matrix).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmtssl
