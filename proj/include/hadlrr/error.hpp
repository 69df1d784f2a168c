#pragma once

#include <stdexcept>
#include <string>

namespace hadlrr {

/// Malformed, missing or inconsistent input data (files, masks, shapes).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver produced a non-finite value or hit a singular system.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hadlrr
