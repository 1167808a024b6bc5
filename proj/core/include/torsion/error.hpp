#pragma once

#include <stdexcept>
#include <string>

namespace torsion {

/// Base for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on caller-supplied data was violated (bad shape, bad
/// parameter range, malformed file).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, runaway walk, mesh
/// generator not terminating, bound violated).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The gradient sup exceeded the inradius bound by more than the allowed
/// discretization slack. Never swallowed by the optimizer.
class BoundViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace torsion
