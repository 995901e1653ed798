#pragma once

#include <stdexcept>
#include <string>

namespace calibra {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input (CSV, JSON, configuration).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class SingularPivotError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

class DegenerateCovarianceError : public Error {
 public:
  using Error::Error;
};

class NonMonotoneError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Logistic / probit MLE diverged (complete or quasi-complete separation).
class SeparationError : public Error {
 public:
  using Error::Error;
};

}  // namespace calibra
