#pragma once

#include <stdexcept>
#include <string>

namespace rationalift {

// Base for every failure raised by the library. The CLI maps the concrete
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, missing files, malformed user input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed corpus, annotation or embedding content.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameters during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace rationalift
