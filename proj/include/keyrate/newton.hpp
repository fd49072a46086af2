#pragma once

// Damped Newton minimization for the small smooth barrier problems used by
// the region solvers. Objectives signal "outside the domain" by returning false.

#include <functional>

#include "keyrate/linalg.hpp"

namespace keyrate {

struct LocalModel {
  double value = 0.0;
  Vector grad;
  Matrix hess;
};

/// order 0: fill value only; order 2: value, gradient and Hessian.
using NewtonObjective = std::function<bool(const Vector& x, int order, LocalModel& out)>;

struct NewtonOptions {
  int max_iterations = 200;
  double decrement_tol = 1e-12;  // stop when lambda^2 / 2 falls below this
  bool convexify = false;        // replace an indefinite Hessian by |eigenvalues|
  double armijo = 0.25;
  double backtrack = 0.5;
};

struct NewtonResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  double decrement = 0.0;  // lambda^2 / 2 at exit
  bool converged = false;
};

/// x0 must lie inside the domain.
NewtonResult newton_minimize(const NewtonObjective& f, const Vector& x0, const NewtonOptions& opts);

}  // namespace keyrate
