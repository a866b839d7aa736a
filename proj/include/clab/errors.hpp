#pragma once

#include <stdexcept>
#include <string>

namespace clab {

/// Base class for all model and input errors raised by this library.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

/// A closed-form approximation was evaluated outside its validity range
/// (e.g. a probability formula produced a value > 1).
class ModelRangeError : public ModelError {
 public:
  explicit ModelRangeError(const std::string& what) : ModelError(what) {}
};

/// An argument is outside the mathematical domain of the expression.
class DomainError : public ModelError {
 public:
  explicit DomainError(const std::string& what) : ModelError(what) {}
};

/// An open queueing system has a device at or beyond full utilization.
class SaturationError : public ModelError {
 public:
  explicit SaturationError(const std::string& what) : ModelError(what) {}
};

/// The contention model has no solution: the system is past the
/// thrashing point. Carries the critical contention intensity.
class ThrashingError : public ModelError {
 public:
  ThrashingError(const std::string& what, double alpha_star)
      : ModelError(what), alpha_star_(alpha_star) {}
  double alpha_star() const { return alpha_star_; }

 private:
  double alpha_star_;
};

/// A fixed-point iteration failed to converge within its budget.
class NoConvergenceError : public ModelError {
 public:
  explicit NoConvergenceError(const std::string& what) : ModelError(what) {}
};

/// Invalid user input: workload spec, scenario file, CLI arguments.
class InputError : public ModelError {
 public:
  explicit InputError(const std::string& what) : ModelError(what) {}
};

}  // namespace clab
