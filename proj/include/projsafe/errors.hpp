#pragma once

#include <stdexcept>
#include <string>

namespace projsafe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a comparison function, or a range/domain
/// mismatch when composing.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NotInvertibleError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Dynamics evaluator produced NaN or Inf.
class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class SingularMassMatrix : public Error {
 public:
  using Error::Error;
};

class NumericalBlowUp : public Error {
 public:
  using Error::Error;
};

class DisturbanceBoundExceeded : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace projsafe
