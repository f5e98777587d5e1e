#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

/// Malformed model definition or an evaluation outside the model's domain.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trajectory left the declared invariant set by more than the tolerance.
class InvarianceError : public std::runtime_error {
 public:
  InvarianceError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Non-finite vector field value hit during integration.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad numeric arguments (non-positive discount, oversize families, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The fixed-point iteration stopped contracting.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No grid control satisfies the nonexpansive selection at some point.
class SelectionError : public std::runtime_error {
 public:
  SelectionError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace pdmp
