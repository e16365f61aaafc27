#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uopt {

// Base for all library failures.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

// An iterative projection did not reach its tolerance; carries the best
// objective value (distance) it found.
class ConvergenceFailure : public Error {
public:
  ConvergenceFailure(const std::string& what, double best_distance)
      : Error(what), best_distance_(best_distance) {}
  double best_distance() const noexcept { return best_distance_; }

private:
  double best_distance_;
};

class EllipticityViolation : public Error {
public:
  using Error::Error;
};

// Regression design matrix lost column rank even at the lowest degree.
class BasisDegeneracy : public Error {
public:
  using Error::Error;
};

// A finite-difference sweep produced NaN/Inf.
class Divergence : public Error {
public:
  Divergence(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

}  // namespace uopt
