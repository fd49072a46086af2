#include <algorithm>

#include "keyrate/error.hpp"
#include "keyrate/solver.hpp"

namespace keyrate {

std::vector<bool> contains(const GeneralModel& m, const std::vector<RatePair>& points, double tol,
                           const SweepOptions& opts) {
  std::vector<bool> out(points.size(), false);
  const double limit = asymptotic_limit(m);
  std::vector<double> rps;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const RatePair& p = points[i];
    if (!(p.rp >= 0.0)) continue;
    if (p.rk <= tol) {
      out[i] = true;  // (rp, 0) is reached by Q = S_x
    } else if (p.rk <= limit + tol) {
      rps.push_back(p.rp);
    }
  }
  if (rps.empty()) return out;
  std::sort(rps.begin(), rps.end());
  rps.erase(std::unique(rps.begin(), rps.end()), rps.end());

  RegionBoundary boundary;
  if (m.my() == 1 && m.mz() == 1) {
    boundary = sweep_boundary(m, rps, opts);
  } else {
    AscentOptions ao;
    ao.threads = opts.threads;
    boundary = ascent_boundary(m, rps, ao);
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const RatePair& p = points[i];
    if (out[i] || !(p.rp >= 0.0) || p.rk > limit + tol) continue;
    const auto it = std::lower_bound(rps.begin(), rps.end(), p.rp);
    const RatePair& b = boundary.points[static_cast<std::size_t>(it - rps.begin())];
    out[i] = b.rk >= p.rk - tol;
  }
  return out;
}

bool contains(const GeneralModel& m, const RatePair& p, double tol, const SweepOptions& opts) {
  return contains(m, std::vector<RatePair>{p}, tol, opts).front();
}

}  // namespace keyrate
