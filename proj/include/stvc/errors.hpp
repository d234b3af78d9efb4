#pragma once

#include <stdexcept>
#include <string>

namespace stvc {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the support of a density (y > trials, non-finite eta).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Distribution parameters violate their invariants.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed input data: duplicate coordinates, bad shapes, schema violations.
class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Non-positive pivot during a Cholesky factorization or a zero diagonal in a
// triangular solve.
class FactorizationError : public NumericalError {
 public:
  FactorizationError(const std::string& what, double pivot = 0.0)
      : NumericalError(what), pivot_(pivot) {}
  double pivot() const noexcept { return pivot_; }

 private:
  double pivot_;
};

}  // namespace stvc
