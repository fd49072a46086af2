#pragma once

// Boundary solvers for R_k(R_p) = sup{ I_k(Q) : I_p(Q) <= R_p, 0 < Q <= S_x }.
//
// sweep_boundary handles m_y = m_z = 1 through a family of convex problems
// indexed by (s, t). ascent_boundary is a multi-start local method for any
// model and carries no global-optimality guarantee. brute_force_grid is an
// exhaustive oracle for m_x <= 2.

#include <cstdint>
#include <string>
#include <vector>

#include "keyrate/model.hpp"
#include "keyrate/rates.hpp"

namespace keyrate {

/// s bounds b Q b^T from above; t = (e Q e^T - b Q b^T) / (b Q b^T + 1).
struct SweepParams {
  double s = 0.0;
  double t = 0.0;
};

struct InnerOptions {
  double gap_tol = 1e-8;   // stop when the barrier duality gap proxy drops below this
  double kkt_tol = 1e-6;   // converged requires kkt_residual below this
  int max_outer = 60;
};

struct SolveReport {
  SymMatrix optimum;       // Q achieving the minimum
  double value = 0.0;      // I_p(Q, s) = 1/2 log|S_x/Q| - 1/2 log(b S_x b^T + 1) + 1/2 log(1 + s)
  int iterations = 0;      // Newton steps over both phases
  double kkt_residual = 0.0;
  bool converged = false;
};

/// min I_p(Q, s) subject to b Q b^T <= s, t (b Q b^T + 1) <= e Q e^T - b Q b^T,
/// 0 < Q <= S_x. Requires m_y = m_z = 1.
/// Throws InvalidArgument, Infeasible (no strictly feasible Q) or MaxIterationsExceeded.
SolveReport inner_convex(const GeneralModel& m, const SweepParams& params, const InnerOptions& opts = {});

/// I_k as a function of t alone: 1/2 log((b S_x b^T + 1)/(e S_x e^T + 1)) + 1/2 log(1 + t).
double key_rate_of_t(const GeneralModel& m, double t);

struct PointMeta {
  double s = 0.0;
  double t = 0.0;
  double kkt_residual = 0.0;
  bool converged = false;
  bool saturated = false;   // the rate budget exceeds what the top of the sweep needs
  double rp_achieved = 0.0; // I_p at sigma_star
  Matrix sigma_star;
};

struct RegionBoundary {
  std::vector<RatePair> points;  // ascending rp, nondecreasing rk
  std::string model_digest;
  std::vector<PointMeta> solver_meta;
};

struct SweepOptions {
  int st_resolution = 200;
  int threads = 0;               // 0: KEYRATE_THREADS or hardware concurrency
  double t_gap_floor = 1e-9;     // closest approach of the t grid to t_max, relative
  double s_floor = 1e-12;        // smallest s on the grid, relative to b S_x b^T
  int refine_iterations = 40;    // bisection steps in t per rate point
  int golden_iterations = 40;    // golden-section steps in log s per bisection probe
  InnerOptions inner;
};

/// Requires m_y = m_z = 1 and rp_grid ascending. rk is clamped at 0.
RegionBoundary sweep_boundary(const GeneralModel& m, const std::vector<double>& rp_grid,
                              const SweepOptions& opts = {});

/// Shorthand taking only the grid resolution.
RegionBoundary sweep_boundary(const GeneralModel& m, const std::vector<double>& rp_grid, int st_resolution);

struct AscentOptions {
  int starts = 8;                 // 4 scaled identities + random interpolants
  std::uint64_t seed = 20240521;
  int gradient_iterations = 400;
  double penalty = 10.0;          // exact-penalty weight on max(0, I_p - rp)
  double barrier_gap = 1e-9;      // interior-point polish stops at this gap proxy
  double certify_tol = 1e-6;
  int threads = 0;
};

/// Multi-start local maximization of I_k subject to I_p <= rp. Each point is
/// certified by the KKT pipeline; failures are flagged unconverged.
RegionBoundary ascent_boundary(const AlignedModel& m, const std::vector<double>& rp_grid,
                               const AscentOptions& opts = {});
RegionBoundary ascent_boundary(const GeneralModel& m, const std::vector<double>& rp_grid,
                               const AscentOptions& opts = {});

/// Best I_k over Q = S_x^{1/2} R(theta) diag(d) R(theta)^T S_x^{1/2} with
/// grid_density values per axis, subject to I_p <= rp. Requires m_x <= 2
/// (DimensionTooLarge otherwise). rk is clamped at 0.
RatePair brute_force_grid(const GeneralModel& m, double rp, int grid_density);
/// Same search for many rates at once; the grid is evaluated a single time.
std::vector<RatePair> brute_force_grid(const GeneralModel& m, const std::vector<double>& rps, int grid_density);

/// True iff the boundary at p.rp reaches p.rk - tol. Uses the sweep when
/// m_y = m_z = 1 and the multi-start ascent otherwise.
bool contains(const GeneralModel& m, const RatePair& p, double tol, const SweepOptions& opts = {});
/// Membership of many points with a single boundary computation.
std::vector<bool> contains(const GeneralModel& m, const std::vector<RatePair>& points, double tol,
                           const SweepOptions& opts = {});

}  // namespace keyrate
