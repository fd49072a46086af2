// Exhaustive grid over conditional covariances in S_x-whitened coordinates:
// Q = S_x^{1/2} R(theta) diag(d1, d2) R(theta)^T S_x^{1/2}, 0 < d_i <= 1.
// The d axes are geometric-quadratic so that both the corner d = 1 and the
// small-eigenvalue tail (large I_p) are represented. The second axis is offset
// by half a step, which halves the effective eigenvalue spacing over theta in
// [0, pi) compared with two identical axes.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "keyrate/error.hpp"
#include "keyrate/solver.hpp"

namespace keyrate {
namespace {

constexpr double kLogFloor = 8.0;  // smallest grid eigenvalue is e^-8

std::vector<double> eigen_axis(int density, double offset) {
  std::vector<double> d(density);
  for (int k = 0; k < density; ++k) {
    double frac = 0.0;
    if (density > 1 && k > 0) frac = (k - offset) / (density - 1);
    d[k] = std::exp(-kLogFloor * frac * frac);
  }
  return d;
}

std::vector<RatePair> grid_values(const GeneralModel& m, int density) {
  if (m.mx() > 2) throw Error(ErrorCode::DimensionTooLarge, "brute_force_grid supports m_x <= 2");
  if (density < 1) throw Error(ErrorCode::InvalidArgument, "grid_density must be positive");
  const detail::Whitened w(m);
  const std::vector<double> d = eigen_axis(density, 0.0);
  const std::vector<double> d_half = eigen_axis(density, 0.5);
  std::vector<RatePair> out;
  RatePair r;
  if (m.mx() == 1) {
    for (double di : d) {
      if (w.rates(Matrix::Constant(1, 1, di), r)) out.push_back(r);
    }
    return out;
  }
  out.reserve(static_cast<std::size_t>(density) * density * density);
  for (int a = 0; a < density; ++a) {
    const double theta = std::numbers::pi * a / density;
    Matrix rot(2, 2);
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    for (double d1 : d) {
      for (double d2 : d_half) {
        const Matrix k = symmetrize(rot * Vector(Eigen::Vector2d(d1, d2)).asDiagonal() * rot.transpose());
        if (w.rates(k, r)) out.push_back(r);
      }
    }
  }
  return out;
}

RatePair best_at(const std::vector<RatePair>& values, double rp) {
  RatePair best{rp, 0.0};
  for (const RatePair& v : values) {
    if (v.rp <= rp + 1e-12 && v.rk > best.rk) best.rk = v.rk;
  }
  return best;
}

}  // namespace

RatePair brute_force_grid(const GeneralModel& m, double rp, int grid_density) {
  return best_at(grid_values(m, grid_density), rp);
}

std::vector<RatePair> brute_force_grid(const GeneralModel& m, const std::vector<double>& rps, int grid_density) {
  const std::vector<RatePair> values = grid_values(m, grid_density);
  std::vector<RatePair> out;
  out.reserve(rps.size());
  for (double rp : rps) out.push_back(best_at(values, rp));
  return out;
}

}  // namespace keyrate
