#include "keyrate/newton.hpp"

#include <cmath>

#include "keyrate/error.hpp"

namespace keyrate {
namespace {

Vector newton_direction(const LocalModel& lm, bool convexify) {
  if (!convexify) {
    Eigen::LLT<Matrix> llt(lm.hess);
    if (llt.info() == Eigen::Success) return -llt.solve(lm.grad);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(lm.hess));
  Vector ev = es.eigenvalues().cwiseAbs();
  const double floor = 1e-10 * std::max(1.0, ev.maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), floor);
  const Matrix& v = es.eigenvectors();
  return -(v * (v.transpose() * lm.grad).cwiseQuotient(ev));
}

}  // namespace

NewtonResult newton_minimize(const NewtonObjective& f, const Vector& x0, const NewtonOptions& opts) {
  NewtonResult res;
  res.x = x0;
  LocalModel lm;
  if (!f(res.x, 2, lm)) {
    throw Error(ErrorCode::SolverFailure, "Newton start point lies outside the domain");
  }
  LocalModel trial;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    const Vector dx = newton_direction(lm, opts.convexify);
    const double slope = lm.grad.dot(dx);
    res.decrement = 0.5 * std::max(0.0, -slope);
    res.value = lm.value;
    if (res.decrement <= opts.decrement_tol) {
      res.converged = true;
      return res;
    }
    double step = 1.0;
    bool accepted = false;
    while (step > 1e-20) {
      const Vector x_new = res.x + step * dx;
      if (f(x_new, 0, trial) && std::isfinite(trial.value) &&
          trial.value <= lm.value + opts.armijo * step * slope) {
        res.x = x_new;
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) {
      // No representable decrease left along a descent direction.
      res.converged = res.decrement <= 1e4 * opts.decrement_tol;
      return res;
    }
    f(res.x, 2, lm);
  }
  res.value = lm.value;
  return res;
}

}  // namespace keyrate
