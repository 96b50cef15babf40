#pragma once

#include <stdexcept>
#include <string>

namespace crowdloss {

/// Raised when an argument violates a documented precondition
/// (degenerate box, empty ground-truth list, shape mismatch, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A force or log-IoU loss was requested for a pair with zero overlap.
class NoForce : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Scene placement could not satisfy the configuration within the retry budget.
class InfeasibleConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Descent diverged or produced non-finite values.
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crowdloss
