#pragma once

#include <stdexcept>
#include <string>

namespace style3d {

// Base of everything the library throws on a broken contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: shapes, ranges, configuration values. CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Missing or unloadable model weights / embedding backends. CLI exit code 3.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during compute (non-finite loss and the like). CLI exit code 4.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace style3d
