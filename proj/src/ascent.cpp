// Multi-start local maximization of I_k subject to I_p <= rp, in S_x-whitened
// coordinates Q = S_x^{1/2} K S_x^{1/2}, 0 < K <= I.
//
// Each start runs projected gradient ascent on the exact penalty
// I_k - rho max(0, I_p - rp), is pulled into the strict interior, and is then
// polished by a log-barrier Newton method
//   minimize  -tau I_k - log(rp - I_p) - log|I - K|
// whose Newton systems are solved in Cholesky-scaled coordinates
// dK = L dY L^T (K = L L^T). The problem is nonconvex, so the Hessian is
// replaced by its eigenvalue-modulus. Every start is certified and the best
// certified one wins.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "keyrate/error.hpp"
#include "keyrate/kkt.hpp"
#include "keyrate/model_io.hpp"
#include "keyrate/parallel.hpp"
#include "keyrate/philox.hpp"
#include "keyrate/solver.hpp"

namespace keyrate {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEigFloor = 1e-9;
constexpr double kTrivialRate = 1e-9;

using Certifier = std::function<KktCertificate(const Matrix& sigma, double rp)>;

struct Eval {
  double ip = kInf;
  double ik = -kInf;
  Matrix gp, gk, ty, tz, k_inv;
};

bool evaluate(const detail::Whitened& w, const Matrix& k, Eval& e) {
  RatePair r;
  if (!w.rates(k, r)) return false;
  e.ip = r.rp;
  e.ik = r.rk;
  e.k_inv = spd_inverse(k);
  e.ty = detail::signal_kernel(w.ry, k);
  e.tz = detail::signal_kernel(w.rz, k);
  e.gp = 0.5 * (e.ty - e.k_inv);
  e.gk = 0.5 * (e.tz - e.ty);
  return true;
}

Matrix project_interval(const Matrix& k, double lo, double hi) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(k));
  const Vector d = es.eigenvalues().cwiseMax(lo).cwiseMin(hi);
  return symmetrize(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

double penalized(const Eval& e, double rp, double rho) { return e.ik - rho * std::max(0.0, e.ip - rp); }

Matrix gradient_phase(const detail::Whitened& w, Matrix k, double rp, double floor, const AscentOptions& opts) {
  Eval cur;
  if (!evaluate(w, k, cur)) return k;
  double step = 0.1;
  for (int it = 0; it < opts.gradient_iterations && step > 1e-12; ++it) {
    Matrix g = cur.gk;
    if (cur.ip > rp) g -= opts.penalty * cur.gp;
    const Matrix trial = project_interval(k + step * g, floor, 1.0);
    Eval next;
    if (evaluate(w, trial, next) && penalized(next, rp, opts.penalty) > penalized(cur, rp, opts.penalty)) {
      k = trial;
      cur = std::move(next);
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return k;
}

// Moves K toward c I (c < 1) until I_p leaves a margin below rp.
bool make_interior(const detail::Whitened& w, Matrix& k, double rp, double floor) {
  const int n = w.dim;
  const double c = 1.0 - 1e-9;
  const Matrix anchor = c * Matrix::Identity(n, n);
  RatePair at_anchor;
  w.rates(anchor, at_anchor);
  if (!(at_anchor.rp < rp)) return false;
  const double target = rp - std::min(1e-3 * rp, 0.5 * (rp - at_anchor.rp));
  k = project_interval(k, floor, c);
  RatePair r;
  if (w.rates(k, r) && r.rp <= target) return true;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (w.rates((1.0 - mid) * k + mid * anchor, r) && r.rp <= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  k = symmetrize((1.0 - hi) * k + hi * anchor);
  return true;
}

struct BarrierState {
  Matrix k, wk;  // K and I - K, updated together so I - K keeps its digits
  Eval e;
  double value = kInf;
};

double barrier_value(const Eval& e, const Matrix& wk, double rp, double tau) {
  const double slack = rp - e.ip;
  double ld_w = 0.0;
  if (!(slack > 0.0) || !try_log_det(wk, ld_w)) return kInf;
  return -tau * e.ik - std::log(slack) - ld_w;
}

void polish(const detail::Whitened& w, BarrierState& st, double rp, double floor, const AscentOptions& opts) {
  const int n = w.dim;
  const double nu = 1.0 + n;
  double tau = 1.0;
  while (true) {
    st.value = barrier_value(st.e, st.wk, rp, tau);
    for (int it = 0; it < 100; ++it) {
      const Matrix l = cholesky_lower(st.k);
      const Matrix lt = l.transpose();
      const auto scaled = [&](const Matrix& a) { return symmetrize(lt * a * l); };
      const double slack = rp - st.e.ip;
      const Matrix w_inv = spd_inverse(st.wk);
      const Matrix gp = scaled(st.e.gp);
      const Matrix grad_m = scaled(-tau * st.e.gk + st.e.gp / slack + w_inv);
      const Vector grad = svec_pairing(grad_m);
      const Vector gp_vec = svec_pairing(gp);
      const Matrix ty = scaled(st.e.ty);
      const Matrix tz = scaled(st.e.tz);
      const Matrix eye = Matrix::Identity(n, n);
      const Matrix wi = scaled(w_inv);
      Matrix hess = -tau * (0.5 * svec_bilinear(ty, ty) - 0.5 * svec_bilinear(tz, tz)) +
                    (0.5 * svec_bilinear(eye, eye) - 0.5 * svec_bilinear(ty, ty)) / slack +
                    gp_vec * gp_vec.transpose() / (slack * slack) + svec_bilinear(wi, wi);
      hess = symmetrize(hess);
      Eigen::SelfAdjointEigenSolver<Matrix> es(hess);
      const double top = es.eigenvalues().cwiseAbs().maxCoeff();
      const Vector lam = es.eigenvalues().cwiseAbs().cwiseMax(1e-14 * top + 1e-300);
      const Vector dy = -(es.eigenvectors() * (es.eigenvectors().transpose() * grad).cwiseQuotient(lam));
      const double decrement = -grad.dot(dy);
      if (!(decrement > 1e-14)) break;
      const Matrix dk = symmetrize(l * svec_to_matrix(dy, n) * lt);
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        BarrierState trial;
        trial.k = symmetrize(st.k + alpha * dk);
        trial.wk = symmetrize(st.wk - alpha * dk);
        if (min_eigenvalue(trial.k) >= floor && evaluate(w, trial.k, trial.e)) {
          trial.value = barrier_value(trial.e, trial.wk, rp, tau);
          if (trial.value <= st.value - 1e-4 * alpha * decrement) {
            st = std::move(trial);
            moved = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!moved || decrement < 1e-12) break;
    }
    if (nu / tau < opts.barrier_gap) break;
    tau *= 10.0;
  }
}

Matrix random_start(PhiloxStream& rng, int n) {
  Matrix a(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) a(r, c) = rng.normal();
  }
  Matrix spd = symmetrize(a * a.transpose()) + 1e-3 * Matrix::Identity(n, n);
  spd *= (0.1 + 0.9 * rng.uniform()) / max_eigenvalue(spd);
  const double mix = 0.2 + 0.6 * rng.uniform();
  return symmetrize((1.0 - mix) * 0.5 * Matrix::Identity(n, n) + mix * spd);
}

struct Candidate {
  Matrix sigma;
  RatePair rates;
  double residual = kInf;
  bool certified = false;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.certified != b.certified) return a.certified;
  if (std::abs(a.rates.rk - b.rates.rk) > 1e-12) return a.rates.rk > b.rates.rk;
  return a.rates.rp < b.rates.rp;
}

Candidate certify_candidate(const Certifier& certifier, const Matrix& sigma, const RatePair& rates, double rp,
                            double tol) {
  Candidate c;
  c.sigma = sigma;
  c.rates = rates;
  try {
    c.residual = certifier(sigma, rp).max_residual();
  } catch (const Error&) {
    c.residual = kInf;
  }
  c.certified = c.residual < tol;
  return c;
}

Candidate solve_point(const GeneralModel& m, const detail::Whitened& w, const Certifier& certifier, double rp,
                      std::size_t index, const AscentOptions& opts) {
  const int n = w.dim;
  const Matrix& sx = m.sigma_x().matrix();
  if (rp <= kTrivialRate) {
    return certify_candidate(certifier, sx, detail::rates_general_raw(m, sx), rp, opts.certify_tol);
  }
  // Eigenvalue floor 1e-9 tr(S_x)/m on Q, mapped to K through the smallest
  // eigenvalue of S_x. Without it, models whose supremum is approached only
  // as Q -> 0 would drive the iterate out of the open cone.
  const double floor = std::max(kEigFloor, kEigFloor * sx.trace() / n / min_eigenvalue(sx));
  PhiloxStream rng(opts.seed, index);
  static constexpr double kScales[] = {1.0, 0.75, 0.5, 0.25};
  Candidate best;
  for (int start = 0; start < opts.starts; ++start) {
    Matrix k = start < 4 ? Matrix(kScales[start] * Matrix::Identity(n, n)) : random_start(rng, n);
    k = gradient_phase(w, k, rp, 2.0 * floor, opts);
    if (!make_interior(w, k, rp, 2.0 * floor)) continue;
    BarrierState st;
    st.k = k;
    st.wk = symmetrize(Matrix::Identity(n, n) - k);
    if (!evaluate(w, st.k, st.e)) continue;
    try {
      polish(w, st, rp, floor, opts);
    } catch (const Error&) {
      continue;
    }
    const Matrix sigma = w.to_sigma(st.k);
    Candidate c = certify_candidate(certifier, sigma, detail::rates_general_raw(m, sigma), rp, opts.certify_tol);
    if (best.sigma.size() == 0 || better(c, best)) best = std::move(c);
  }
  if (best.sigma.size() == 0) {
    throw Error(ErrorCode::MaxIterationsExceeded, "no ascent start reached a feasible point");
  }
  return best;
}

RegionBoundary run_ascent(const GeneralModel& m, const std::string& digest, const Certifier& certifier,
                          const std::vector<double>& rp_grid, const AscentOptions& opts) {
  for (std::size_t i = 0; i < rp_grid.size(); ++i) {
    if (!(rp_grid[i] >= 0.0) || !std::isfinite(rp_grid[i])) {
      throw Error(ErrorCode::InvalidArgument, "rate grid entries must be finite and nonnegative");
    }
    if (i > 0 && rp_grid[i] < rp_grid[i - 1]) throw Error(ErrorCode::InvalidArgument, "rate grid must be ascending");
  }
  if (opts.starts < 1) throw Error(ErrorCode::InvalidArgument, "ascent needs at least one start");
  const detail::Whitened w(m);
  std::vector<Candidate> found(rp_grid.size());
  parallel_for(rp_grid.size(), resolve_thread_count(opts.threads),
               [&](std::size_t i) { found[i] = solve_point(m, w, certifier, rp_grid[i], i, opts); });

  RegionBoundary out;
  out.model_digest = digest;
  for (std::size_t i = 0; i < rp_grid.size(); ++i) {
    const Candidate& c = found[i];
    PointMeta meta;
    meta.s = (m.b() * c.sigma * m.b().transpose()).trace();
    meta.t = std::numeric_limits<double>::quiet_NaN();
    meta.kkt_residual = c.residual;
    meta.converged = c.certified;
    meta.rp_achieved = c.rates.rp;
    meta.sigma_star = c.sigma;
    out.points.push_back(RatePair{rp_grid[i], std::max(0.0, c.rates.rk)});
    out.solver_meta.push_back(std::move(meta));
  }
  for (std::size_t k = 1; k < out.points.size(); ++k) {
    if (out.points[k].rk < out.points[k - 1].rk) {
      out.points[k].rk = out.points[k - 1].rk;
      out.solver_meta[k] = out.solver_meta[k - 1];
    }
  }
  return out;
}

}  // namespace

RegionBoundary ascent_boundary(const GeneralModel& m, const std::vector<double>& rp_grid, const AscentOptions& opts) {
  const Certifier certifier = [&m](const Matrix& sigma, double rp) { return certify(m, sigma, rp); };
  return run_ascent(m, model_digest(m), certifier, rp_grid, opts);
}

RegionBoundary ascent_boundary(const AlignedModel& m, const std::vector<double>& rp_grid, const AscentOptions& opts) {
  const Certifier certifier = [&m](const Matrix& sigma, double rp) {
    return certify(m, ConditionalCov(m.sigma_x(), sigma), rp);
  };
  return run_ascent(to_general(m), model_digest(m), certifier, rp_grid, opts);
}

}  // namespace keyrate
