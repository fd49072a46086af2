// Log-barrier Newton method for the per-(s, t) problem, solved in whitened
// coordinates K = S_x^{-1/2} Q S_x^{-1/2}:
//
//   minimize  -log|K|
//   s.t.      c1(K) = s - <bb, K>              > 0
//             c2(K) = <ee - (1+t) bb, K> - t   > 0
//             0 < K < I
//
// with bb = beta beta^T, ee = eps eps^T, beta = S_x^{1/2} b^T, eps = S_x^{1/2} e^T.
// The sweep calls this tens of thousands of times, so the solver is written
// against bounded-size Eigen types for small m_x and never touches the heap
// inside the Newton loop.

#include <algorithm>
#include <cmath>

#include "keyrate/error.hpp"
#include "keyrate/solver.hpp"

namespace keyrate {
namespace {

// Extended precision: near the top of the sweep I - K has eigenvalues around
// 1e-12 while its entries are O(1), which double cannot resolve.
using Real = long double;

// Iterate of the barrier method. The two scalar slacks are carried alongside
// K and updated from increments computed in scaled coordinates: near the
// optimum they are many orders of magnitude smaller than the entries of K, so
// recomputing them as s - <bb, K> would lose every significant digit.
template <class Mat>
struct Iterate {
  Mat k;
  Mat w;  // I - K, tracked separately for the same reason
  Real c1 = 0.0;
  Real c2 = 0.0;
  Real r = 0.0;  // phase-I slack
};

template <class Mat, class HVec, class HMat>
struct Derivs {
  HVec grad;
  HMat hess;
  Mat l;
  HVec u1;
  HVec u2;
};

template <class Mat, class HMat, class HVec>
class Barrier {
 public:
  using It = Iterate<Mat>;
  using D = Derivs<Mat, HVec, HMat>;

  Barrier(const Matrix& bb, const Matrix& g2, Real s, Real t)
      : n_(static_cast<int>(bb.rows())),
        p_(svec_size(n_)),
        bb_(bb.cast<Real>()),
        g2_(g2.cast<Real>()),
        s_(s),
        t_(t) {}

  int n() const { return n_; }
  int p() const { return p_; }
  const Mat& bb() const { return bb_; }
  const Mat& g2() const { return g2_; }

  It start(const Mat& k, Real r) const {
    It it;
    it.k = k;
    it.w = Mat::Identity(n_, n_) - k;
    it.c1 = s_ - bb_.cwiseProduct(k).sum();
    it.c2 = g2_.cwiseProduct(k).sum() - t_;
    it.r = r;
    return it;
  }

  Mat to_mat(const HVec& x) const {
    Mat out(n_, n_);
    int k = 0;
    for (int i = 0; i < n_; ++i) {
      for (int j = i; j < n_; ++j, ++k) out(i, j) = out(j, i) = x(k);
    }
    return out;
  }

  // Objective w_r * r - w_k log|K| - log|I-K| - log(c1 + r) - log(c2 + r).
  // Derivatives are taken in scaled coordinates dK = L dY L^T with K = L L^T,
  // where the log|K| block of the Hessian is the identity; without this the
  // Hessian is numerically singular once K has eigenvalues near 0. The phase-I
  // slack r is appended as a last coordinate when `slack` is set.
  bool eval(const It& it, bool slack, Real w_r, Real w_k, Real& value, D* d) const {
    const Real a1 = it.c1 + (slack ? it.r : 0.0);
    const Real a2 = it.c2 + (slack ? it.r : 0.0);
    if (!(a1 > 0.0) || !(a2 > 0.0)) return false;
    Eigen::LLT<Mat> lk(it.k);
    Eigen::LLT<Mat> lw(it.w);
    if (lk.info() != Eigen::Success || lw.info() != Eigen::Success) return false;
    Real ld_k = 0.0;
    Real ld_w = 0.0;
    for (int i = 0; i < n_; ++i) {
      const Real dk = lk.matrixLLT()(i, i);
      const Real dw = lw.matrixLLT()(i, i);
      if (!(dk > 0.0) || !(dw > 0.0)) return false;
      ld_k += 2.0 * std::log(dk);
      ld_w += 2.0 * std::log(dw);
    }
    value = (slack ? w_r * it.r : 0.0) - w_k * ld_k - ld_w - std::log(a1) - std::log(a2);
    if (!std::isfinite(value)) return false;
    if (!d) return true;

    d->l = lk.matrixL();
    const Mat wl = lw.matrixL().solve(d->l);
    const Mat b = wl.transpose() * wl;  // L^T (I-K)^{-1} L
    d->u1 = pairing(d->l.transpose() * bb_ * d->l);
    d->u2 = pairing(d->l.transpose() * g2_ * d->l);
    const int dim = p_ + (slack ? 1 : 0);
    d->grad.resize(dim);
    d->hess.resize(dim, dim);
    Mat g = b;
    g.diagonal().array() -= w_k;
    d->grad.head(p_) = pairing(g) + d->u1 / a1 - d->u2 / a2;
    bilinear(b, d->hess);
    int idx = 0;
    for (int i = 0; i < n_; ++i) {
      for (int j = i; j < n_; ++j, ++idx) d->hess(idx, idx) += (i == j ? 1.0 : 2.0) * w_k;
    }
    d->hess.topLeftCorner(p_, p_) +=
        d->u1 * d->u1.transpose() / (a1 * a1) + d->u2 * d->u2.transpose() / (a2 * a2);
    if (slack) {
      d->grad(p_) = w_r - 1.0 / a1 - 1.0 / a2;
      const HVec cross = -d->u1 / (a1 * a1) + d->u2 / (a2 * a2);
      d->hess.block(0, p_, p_, 1) = cross;
      d->hess.block(p_, 0, 1, p_) = cross.transpose();
      d->hess(p_, p_) = 1.0 / (a1 * a1) + 1.0 / (a2 * a2);
    }
    return true;
  }

  It step(const It& it, const D& d, const HVec& dy, Real alpha) const {
    It out = it;
    const Mat dk = alpha * (d.l * to_mat(dy.head(p_)) * d.l.transpose());
    out.k += dk;
    out.w -= dk;
    out.c1 -= alpha * d.u1.dot(dy.head(p_));
    out.c2 += alpha * d.u2.dot(dy.head(p_));
    if (dy.size() > p_) out.r += alpha * dy(p_);
    return out;
  }

 private:
  template <class M>
  HVec pairing(const M& g) const {
    HVec out(p_);
    int k = 0;
    for (int i = 0; i < n_; ++i) {
      for (int j = i; j < n_; ++j, ++k) out(k) = (i == j) ? g(i, i) : g(i, j) + g(j, i);
    }
    return out;
  }

  // Top-left p x p block H_kl = tr(B E_k B E_l).
  void bilinear(const Mat& b, HMat& h) const {
    const auto term = [&b](int i, int j, int r, int s) {
      Real v = b(s, i) * b(j, r);
      if (i != j) v += b(s, j) * b(i, r);
      if (r != s) {
        v += b(r, i) * b(j, s);
        if (i != j) v += b(r, j) * b(i, s);
      }
      return v;
    };
    int k = 0;
    for (int i = 0; i < n_; ++i) {
      for (int j = i; j < n_; ++j, ++k) {
        int l = 0;
        for (int r = 0; r < n_; ++r) {
          for (int s = r; s < n_; ++s, ++l) {
            if (l < k) continue;
            h(k, l) = h(l, k) = term(i, j, r, s);
          }
        }
      }
    }
  }

  int n_;
  int p_;
  Mat bb_;
  Mat g2_;
  Real s_;
  Real t_;
};

struct NewtonStats {
  int iterations = 0;
  bool converged = false;
};

// Damped Newton on one centering problem; `it` must start inside the domain.
template <class Bar, class HMat, class HVec>
NewtonStats center(const Bar& bar, typename Bar::It& it, bool slack, Real w_r, Real w_k, Real tol,
                   int max_iter) {
  NewtonStats st;
  Real value = 0.0;
  typename Bar::D d;
  if (!bar.eval(it, slack, w_r, w_k, value, &d)) {
    throw Error(ErrorCode::SolverFailure, "barrier start point lies outside the domain");
  }
  for (; st.iterations < max_iter; ++st.iterations) {
    Eigen::LLT<HMat> llt(d.hess);
    HVec dy;
    if (llt.info() == Eigen::Success) {
      dy = -llt.solve(d.grad);
    } else {
      Eigen::SelfAdjointEigenSolver<HMat> es(d.hess);
      HVec ev = es.eigenvalues().cwiseAbs();
      const Real floor = 1e-12 * std::max(Real(1), ev.maxCoeff());
      for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), floor);
      dy = -(es.eigenvectors() * (es.eigenvectors().transpose() * d.grad).cwiseQuotient(ev));
    }
    const Real slope = d.grad.dot(dy);
    const Real decrement = 0.5 * std::max(Real(0), -slope);
    if (decrement <= tol) {
      st.converged = true;
      return st;
    }
    // Inside the quadratic-convergence region of a self-concordant barrier
    // the full step is safe; there the Armijo test would only see round-off.
    const bool quadratic = decrement < 0.05;
    Real alpha = 1.0;
    bool accepted = false;
    Real trial = 0.0;
    while (alpha > 1e-20) {
      typename Bar::It next = bar.step(it, d, dy, alpha);
      if (bar.eval(next, slack, w_r, w_k, trial, nullptr) &&
          (quadratic || trial <= value + 0.25 * alpha * slope)) {
        it = std::move(next);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      st.converged = decrement <= 1e4 * tol;
      return st;
    }
    bar.eval(it, slack, w_r, w_k, value, &d);
  }
  return st;
}

template <class Mat, class HMat, class HVec>
SolveReport solve(const detail::Whitened& w, const Matrix& bb, const Matrix& g2, double s, double t,
                  const InnerOptions& opts) {
  using Bar = Barrier<Mat, HMat, HVec>;
  const Bar bar(bb, g2, s, t);
  const int n = bar.n();
  constexpr int kNewtonCap = 100;
  SolveReport rep;

  // Phase I: minimize tau * r + barrier over (K, r) until K is strictly
  // feasible. On the central path r(tau) - nu/tau lower-bounds the optimal slack.
  typename Bar::It it = bar.start(0.5 * Mat::Identity(n, n), 0.0);
  if (!(it.c1 > 0.0 && it.c2 > 0.0)) {
    it.r = std::max({-it.c1, -it.c2, Real(0)}) + 1;
    const Real nu1 = 2.0 * n + 2.0;
    bool found = false;
    for (Real tau = 1.0; nu1 / tau >= 1e-14; tau *= 10.0) {
      const NewtonStats st = center<Bar, HMat, HVec>(bar, it, true, tau, 1.0, 1e-3, kNewtonCap);
      rep.iterations += st.iterations;
      if (it.c1 > 0.0 && it.c2 > 0.0) {
        found = true;
        break;
      }
      if (it.r - nu1 / tau > 0.0) {
        throw Error(ErrorCode::Infeasible, "no conditional covariance satisfies the (s, t) constraints");
      }
    }
    if (!found) throw Error(ErrorCode::Infeasible, "the (s, t) constraint set has no strict interior");
    it.r = 0.0;
  }

  // Phase II: minimize -tau log|K| - log|I-K| - log c1 - log c2 for tau = 1, 10, ...
  const Real nu = n + 2.0;  // I - K > 0 and the two scalar constraints
  Real tau = 1.0;
  bool newton_ok = false;
  int outer = 0;
  for (; outer < opts.max_outer; ++outer, tau *= 10.0) {
    const bool last = nu / tau < opts.gap_tol;
    // Intermediate centering only needs to stay near the central path.
    const NewtonStats st = center<Bar, HMat, HVec>(bar, it, false, 0.0, tau, last ? 1e-12 : 1e-3, kNewtonCap);
    rep.iterations += st.iterations;
    newton_ok = st.converged;
    if (last) break;
  }
  if (outer == opts.max_outer) {
    throw Error(ErrorCode::MaxIterationsExceeded, "barrier schedule did not reach the gap tolerance");
  }

  // Central-path duals and the stationarity residual of
  // -K^{-1} + l1 bb - l2 g2 + Z = 0 with Z = (I-K)^{-1}/tau, evaluated in the
  // scaled frame L^T (.) L where K^{-1} becomes the identity.
  const Mat l = it.k.llt().matrixL();
  const Mat wl = it.w.llt().matrixL().solve(l);
  const Real l1 = 1.0 / (tau * it.c1);
  const Real l2 = 1.0 / (tau * it.c2);
  Mat stat = l1 * (l.transpose() * bar.bb() * l) - l2 * (l.transpose() * bar.g2() * l) +
             (wl.transpose() * wl) / tau;
  stat.diagonal().array() -= 1.0;
  const Real scale = std::sqrt(static_cast<Real>(n)) + l1 * (l.transpose() * bar.bb() * l).norm() +
                     l2 * (l.transpose() * bar.g2() * l).norm() + (wl.transpose() * wl).norm() / tau;
  rep.kkt_residual = static_cast<double>(stat.norm() / scale + nu / tau);
  rep.converged = newton_ok && rep.kkt_residual < opts.kkt_tol;

  const Matrix kd = it.k.template cast<double>();
  rep.optimum = SymMatrix(w.to_sigma(kd));
  rep.value = -0.5 * log_det(kd) - 0.5 * w.ld_y_full + 0.5 * std::log1p(s);
  return rep;
}

template <int N>
using SmallMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, 0, N, N>;
template <int N>
using SmallH = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, 0, N*(N + 1) / 2 + 1, N*(N + 1) / 2 + 1>;
template <int N>
using SmallV = Eigen::Matrix<Real, Eigen::Dynamic, 1, 0, N*(N + 1) / 2 + 1, 1>;

}  // namespace

double key_rate_of_t(const GeneralModel& m, double t) {
  const Matrix& sx = m.sigma_x().matrix();
  const double by = (m.b() * sx * m.b().transpose())(0, 0);
  const double ez = (m.e() * sx * m.e().transpose())(0, 0);
  return 0.5 * (std::log1p(by) - std::log1p(ez)) + 0.5 * std::log1p(t);
}

SolveReport inner_convex(const GeneralModel& m, const SweepParams& params, const InnerOptions& opts) {
  if (m.my() != 1 || m.mz() != 1) {
    throw Error(ErrorCode::InvalidArgument, "inner_convex requires single-row b and e");
  }
  if (!(params.s >= 0.0) || !(params.t >= -1.0) || !std::isfinite(params.s) || !std::isfinite(params.t)) {
    throw Error(ErrorCode::InvalidArgument, "sweep parameters need s >= 0 and t >= -1");
  }
  const detail::Whitened w(m);
  const Vector beta = w.ry.row(0).transpose();
  const Vector eps = w.rz.row(0).transpose();
  const Matrix bb = beta * beta.transpose();
  const Matrix g2 = eps * eps.transpose() - (1.0 + params.t) * bb;
  if (w.dim <= 2) return solve<SmallMat<2>, SmallH<2>, SmallV<2>>(w, bb, g2, params.s, params.t, opts);
  if (w.dim <= 4) return solve<SmallMat<4>, SmallH<4>, SmallV<4>>(w, bb, g2, params.s, params.t, opts);
  using DynMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using DynVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  return solve<DynMat, DynMat, DynVec>(w, bb, g2, params.s, params.t, opts);
}

}  // namespace keyrate
