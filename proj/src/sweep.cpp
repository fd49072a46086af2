// (s, t) sweep for m_y = m_z = 1.
//
// For fixed t, f(t) = min_s min_Q I_p(Q, s) is the smallest communication rate
// that reaches key rate I_k(t), and f is nondecreasing in t because the
// t-constraint tightens as t grows. A coarse (t, s) grid brackets
// sup{t : f(t) <= rp} for every requested rp, then bisection on t with a
// golden-section minimization over log s refines each point independently.

#include <algorithm>
#include <cmath>
#include <limits>

#include "keyrate/error.hpp"
#include "keyrate/model_io.hpp"
#include "keyrate/parallel.hpp"
#include "keyrate/solver.hpp"

namespace keyrate {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Probe {
  double value = kInf;  // I_p(Q, s); +inf when infeasible or unconverged
  double s = 0.0;
  SolveReport report;
};

Probe probe(const GeneralModel& m, double s, double t, const InnerOptions& opts) {
  Probe p;
  p.s = s;
  try {
    p.report = inner_convex(m, SweepParams{s, t}, opts);
    if (p.report.converged) p.value = p.report.value;
  } catch (const Error& err) {
    if (err.code() != ErrorCode::Infeasible && err.code() != ErrorCode::MaxIterationsExceeded &&
        err.code() != ErrorCode::SolverFailure && err.code() != ErrorCode::NotPositiveDefinite) {
      throw;
    }
  }
  return p;
}

// Golden-section minimization of I_p(., t) over log s in [u_lo, u_hi].
Probe minimize_over_s(const GeneralModel& m, double t, double u_lo, double u_hi, int iterations,
                      const InnerOptions& opts) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = u_lo;
  double b = u_hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  Probe pc = probe(m, std::exp(c), t, opts);
  Probe pd = probe(m, std::exp(d), t, opts);
  Probe best = pc.value <= pd.value ? pc : pd;
  for (int it = 0; it < iterations; ++it) {
    // Ties (including both infeasible) move toward larger s, where the
    // feasible set is larger.
    if (pc.value < pd.value) {
      b = d;
      d = c;
      pd = pc;
      c = b - kInvPhi * (b - a);
      pc = probe(m, std::exp(c), t, opts);
      if (pc.value < best.value) best = pc;
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + kInvPhi * (b - a);
      pd = probe(m, std::exp(d), t, opts);
      if (pd.value < best.value) best = pd;
    }
  }
  return best;
}

// Samples at most kScanPoints columns in [c_lo, c_hi], then golden-sections
// between the neighbours of the best sample. I_p(., t) is unimodal in log s
// but can be infeasible on part of the bracket, which misleads a plain golden
// section started from the bracket ends.
Probe scan_then_minimize(const GeneralModel& m, double t, const std::vector<double>& u_grid, int c_lo, int c_hi,
                         const SweepOptions& opts) {
  constexpr int kScanPoints = 12;
  std::vector<double> us;
  const int cells = c_hi - c_lo;
  if (cells + 1 <= kScanPoints) {
    for (int j = c_lo; j <= c_hi; ++j) us.push_back(u_grid[j]);
  } else {
    for (int q = 0; q < kScanPoints; ++q) us.push_back(u_grid[c_lo] + (u_grid[c_hi] - u_grid[c_lo]) * q / (kScanPoints - 1));
  }
  std::size_t best_i = 0;
  Probe best;
  for (std::size_t q = 0; q < us.size(); ++q) {
    Probe p = probe(m, std::exp(us[q]), t, opts.inner);
    if (p.value < best.value || (p.value == best.value && p.value == kInf)) {
      best = std::move(p);
      best_i = q;
    }
  }
  if (us.size() < 2) return best;
  const double a = us[best_i == 0 ? 0 : best_i - 1];
  const double b = us[std::min(us.size() - 1, best_i + 1)];
  Probe refined = minimize_over_s(m, t, a, b, opts.golden_iterations, opts.inner);
  return refined.value < best.value ? refined : best;
}

struct Row {
  double f = kInf;
  int arg = -1;
  Probe best;
};

PointMeta trivial_point(const GeneralModel& m, double bx, double t_x) {
  PointMeta meta;
  meta.s = bx;
  meta.t = t_x;
  meta.converged = true;
  meta.sigma_star = m.sigma_x().matrix();
  return meta;
}

PointMeta meta_from(const GeneralModel& m, const Probe& p, double t) {
  PointMeta meta;
  meta.s = p.s;
  meta.t = t;
  meta.kkt_residual = p.report.kkt_residual;
  meta.converged = p.report.converged;
  meta.sigma_star = p.report.optimum.matrix();
  meta.rp_achieved = detail::rates_general_raw(m, meta.sigma_star).rp;
  return meta;
}

}  // namespace

RegionBoundary sweep_boundary(const GeneralModel& m, const std::vector<double>& rp_grid, const SweepOptions& opts) {
  if (m.my() != 1 || m.mz() != 1) {
    throw Error(ErrorCode::InvalidArgument, "sweep_boundary requires single-row b and e");
  }
  if (opts.st_resolution < 2) throw Error(ErrorCode::InvalidArgument, "st_resolution must be at least 2");
  for (std::size_t i = 0; i < rp_grid.size(); ++i) {
    if (!(rp_grid[i] >= 0.0) || !std::isfinite(rp_grid[i])) {
      throw Error(ErrorCode::InvalidArgument, "rate grid entries must be finite and nonnegative");
    }
    if (i > 0 && rp_grid[i] < rp_grid[i - 1]) throw Error(ErrorCode::InvalidArgument, "rate grid must be ascending");
  }

  const Matrix& sx = m.sigma_x().matrix();
  const double bx = (m.b() * sx * m.b().transpose())(0, 0);
  const double ex = (m.e() * sx * m.e().transpose())(0, 0);
  const double t_x = (ex - bx) / (bx + 1.0);
  const double t_max = std::expm1(2.0 * asymptotic_limit(m) + std::log1p(ex) - std::log1p(bx));
  const double span = t_max - t_x;

  RegionBoundary out;
  out.model_digest = model_digest(m);
  out.points.resize(rp_grid.size());
  out.solver_meta.resize(rp_grid.size());
  for (std::size_t i = 0; i < rp_grid.size(); ++i) {
    out.points[i] = RatePair{rp_grid[i], 0.0};
    out.solver_meta[i] = trivial_point(m, bx, t_x);
  }
  if (!(span > 1e-13 * (1.0 + std::abs(t_x))) || bx <= 0.0) return out;

  const int n = opts.st_resolution;
  std::vector<double> t_grid(n);
  std::vector<double> u_grid(n);  // log s, ascending
  // Half of the t rows are evenly spaced over [t_x, t_max] and half crowd
  // geometrically toward t_max, where I_p grows without bound.
  for (int i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / (n - 1);
    const double t_top = t_max - span * opts.t_gap_floor;
    t_grid[i] = i % 2 == 0 ? std::min(t_top, t_x + span * frac) : t_max - span * std::pow(opts.t_gap_floor, frac);
    u_grid[i] = std::log(bx) + (1.0 - frac) * std::log(opts.s_floor);
  }
  std::sort(t_grid.begin(), t_grid.end());
  t_grid.front() = t_x;

  const int threads = resolve_thread_count(opts.threads);
  std::vector<Row> rows(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Row& row = rows[i];
    for (int j = 0; j < n; ++j) {
      Probe p = probe(m, std::exp(u_grid[j]), t_grid[i], opts.inner);
      if (p.value < row.f) {
        row.f = p.value;
        row.arg = j;
        row.best = std::move(p);
      }
    }
    // The minimum over s has a kink, so the best column can sit well above
    // it; for a unimodal function it lies between the neighbouring columns.
    if (row.arg >= 0) {
      Probe p = minimize_over_s(m, t_grid[i], u_grid[std::max(0, row.arg - 1)], u_grid[std::min(n - 1, row.arg + 1)],
                                opts.golden_iterations, opts.inner);
      if (p.value < row.f) {
        row.f = p.value;
        row.best = std::move(p);
      }
    }
  });

  parallel_for(rp_grid.size(), threads, [&](std::size_t k) {
    const double rp = rp_grid[k];
    if (rp <= 0.0) return;
    int top = -1;
    for (int i = 0; i < n; ++i) {
      if (rows[i].f <= rp) top = i;
    }
    if (top < 0) return;
    if (top == n - 1) {
      PointMeta meta = meta_from(m, rows[top].best, t_grid[top]);
      meta.saturated = true;
      out.points[k].rk = std::max(0.0, key_rate_of_t(m, t_grid[top]));
      out.solver_meta[k] = std::move(meta);
      return;
    }
    int j_lo = rows[top].arg;
    int j_hi = rows[top].arg;
    if (rows[top + 1].arg >= 0) {
      j_lo = std::min(j_lo, rows[top + 1].arg);
      j_hi = std::max(j_hi, rows[top + 1].arg);
    }
    const int c_lo = std::max(0, j_lo - 2);
    const int c_hi = std::min(n - 1, j_hi + 2);

    double lo = t_grid[top];
    double hi = t_grid[top + 1];
    Probe best = rows[top].best;
    for (int it = 0; it < opts.refine_iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      Probe p = scan_then_minimize(m, mid, u_grid, c_lo, c_hi, opts);
      if (p.value <= rp) {
        lo = mid;
        best = std::move(p);
      } else {
        hi = mid;
      }
    }
    out.points[k].rk = std::max(0.0, key_rate_of_t(m, lo));
    out.solver_meta[k] = meta_from(m, best, lo);
  });

  // Bisection noise must not break monotonicity: a point found for a smaller
  // rate budget is feasible for every larger one.
  for (std::size_t k = 1; k < out.points.size(); ++k) {
    if (out.points[k].rk < out.points[k - 1].rk) {
      out.points[k].rk = out.points[k - 1].rk;
      out.solver_meta[k] = out.solver_meta[k - 1];
    }
  }
  return out;
}

RegionBoundary sweep_boundary(const GeneralModel& m, const std::vector<double>& rp_grid, int st_resolution) {
  SweepOptions opts;
  opts.st_resolution = st_resolution;
  return sweep_boundary(m, rp_grid, opts);
}

}  // namespace keyrate
