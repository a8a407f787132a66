#pragma once

#include <stdexcept>
#include <string>

namespace spreader {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise unusable vehicle state / command.
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// Bad scenario, plan, or file contents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Matrices of different sizes were combined.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Calibration polynomials produce invalid pattern parameters.
class CalibrationDomainError : public Error {
 public:
  using Error::Error;
};

/// Regression design is rank deficient.
class FitError : public Error {
 public:
  using Error::Error;
};

/// A control schedule leaves the admissible set.
class InfeasibleScheduleError : public Error {
 public:
  using Error::Error;
};

/// The optimizer produced a non-finite cost or gradient.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

}  // namespace spreader
