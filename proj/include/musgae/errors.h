// Exception types. The CLI maps them onto exit codes.

#pragma once

#include <stdexcept>
#include <string>

namespace musgae {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line or configuration (exit 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or insufficient input data (exit 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Training diverged or produced non-finite values (exit 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace musgae
