#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace baryvae {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension disagreement between arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Precondition violation on a value (empty family, bad weights, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Arithmetic that failed to converge or produced non-finite values.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double residual = 0.0,
               std::size_t iterations = 0)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

class NotPsdError : public NumericError {
 public:
  NotPsdError(const std::string& what, double eigenvalue)
      : NumericError(what, eigenvalue), eigenvalue_(eigenvalue) {}

  double eigenvalue() const { return eigenvalue_; }

 private:
  double eigenvalue_;
};

// Malformed or unsupported file contents (magic numbers, versions, layouts).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration (missing or unknown keys, out-of-range values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace baryvae
