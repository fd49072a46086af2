#include "keyrate/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "keyrate/error.hpp"
#include "keyrate/model_io.hpp"

namespace keyrate {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMultiplierPsdTol = 1e-8;
constexpr double kSingularValueFloor = 1e-10;

// Everything the certificate checks need at one candidate optimum. The
// channel kernels T_y, T_z are (S + S_w)^{-1} for aligned models and
// G^T (G S G^T + I)^{-1} G for general ones.
struct Point {
  const AlignedModel* aligned = nullptr;
  const GeneralModel* general = nullptr;
  Matrix sx, s, s_inv, d, ty, tz, py, pz;
  RatePair rates;
};

Point make_point(const GeneralModel& m, const Matrix& s) {
  Point p;
  p.general = &m;
  p.sx = m.sigma_x().matrix();
  p.s = symmetrize(s);
  p.s_inv = spd_inverse(p.s);
  p.d = p.sx - p.s;
  p.ty = detail::signal_kernel(m.b(), p.s);
  p.tz = detail::signal_kernel(m.e(), p.s);
  p.py = symmetrize(m.b().transpose() * m.b());
  p.pz = symmetrize(m.e().transpose() * m.e());
  p.rates = detail::rates_general_raw(m, p.s);
  return p;
}

Point make_point(const AlignedModel& m, const Matrix& s) {
  Point p;
  p.aligned = &m;
  p.sx = m.sigma_x().matrix();
  p.s = symmetrize(s);
  p.s_inv = spd_inverse(p.s);
  p.d = p.sx - p.s;
  p.ty = spd_inverse(symmetrize(p.s + m.sigma_wy().matrix()));
  p.tz = spd_inverse(symmetrize(p.s + m.sigma_wz().matrix()));
  p.py = spd_inverse(m.sigma_wy().matrix());
  p.pz = spd_inverse(m.sigma_wz().matrix());
  p.rates = rates_aligned(m, ConditionalCov(m.sigma_x(), p.s));
  return p;
}

Matrix multiplier_matrix(const Point& p, double mu) { return symmetrize(mu * (p.s_inv - p.ty) + (p.tz - p.ty)); }

double compl_slack_m(const Matrix& m, const Matrix& d) {
  return (m * d).norm() / (1.0 + m.norm() * d.norm()) + psd_violation(m) / (1.0 + m.norm());
}

double compl_slack_mu(double mu, double rp, double ip) {
  return std::abs(mu * (rp - ip)) / (1.0 + mu * rp) + std::max(0.0, ip - rp) / (1.0 + rp);
}

Multipliers best_multipliers(const Point& p, double rp) {
  const Matrix a1 = symmetrize(p.s_inv - p.ty);
  const Matrix a0 = symmetrize(p.tz - p.ty);
  std::vector<double> candidates{0.0};
  const Matrix a1d = a1 * p.d;
  const Matrix a0d = a0 * p.d;
  const double den = a1d.squaredNorm();
  if (den > 0.0) candidates.push_back(std::max(0.0, -(a1d.array() * a0d.array()).sum() / den));
  // a1 = S^{-1/2} (I + R^T R)^{-1} S^{-1/2} is positive definite, so the
  // pencil (-a0, a1) is symmetric-definite.
  candidates.push_back(std::max(0.0, generalized_eigenvalues(-a0, a1)(0)));

  Multipliers best;
  best.residual = kInf;
  for (double mu : candidates) {
    const Matrix m = multiplier_matrix(p, mu);
    const double r = compl_slack_m(m, p.d) + compl_slack_mu(mu, rp, p.rates.rp);
    if (r < best.residual) best = Multipliers{mu, m, r};
  }
  return best;
}

void check_multipliers(double mu, const Matrix& m) {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw Error(ErrorCode::NonPsdInput, "mu must be nonnegative");
  if (min_eigenvalue(symmetrize(m)) < -kMultiplierPsdTol * (1.0 + m.norm())) {
    throw Error(ErrorCode::NonPsdInput, "multiplier matrix is not positive semidefinite");
  }
}

// P~ = (I - H S)^{-1} H with H = T_y + M / (1 + mu).
Matrix enhanced_precision(const Point& p, double mu, const Matrix& m) {
  const int n = static_cast<int>(p.s.rows());
  const Matrix h = p.ty + m / (1.0 + mu);
  const Matrix lhs = Matrix::Identity(n, n) - h * p.s;
  return symmetrize(lhs.partialPivLu().solve(h));
}

// (S + W~)^{-1} from the precision: (I + P~ S)^{-1} P~.
Matrix enhanced_kernel(const Matrix& s, const Matrix& precision) {
  const int n = static_cast<int>(s.rows());
  const Matrix lhs = Matrix::Identity(n, n) + precision * s;
  return symmetrize(lhs.partialPivLu().solve(precision));
}

double smallest_singular_value(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff();
}

ChangeOfVariable change_general(const GeneralModel& m, const Matrix& precision, const Matrix& s, double mu) {
  if (!(mu > 0.0)) throw Error(ErrorCode::MuZero, "change of variable needs mu > 0");
  const int n = m.mx();
  const Matrix& sx = m.sigma_x().matrix();
  const Matrix pz = symmetrize(m.e().transpose() * m.e());
  const Matrix gap = symmetrize(precision - pz);
  if (min_eigenvalue(gap) <= kPdFloor) throw Error(ErrorCode::NotDegraded, "enhanced channel is not strictly better");
  const Matrix w = spd_inverse(symmetrize(precision));

  ChangeOfVariable cv;
  const Matrix gz = symmetrize(m.e() * sx * m.e().transpose()) + Matrix::Identity(m.mz(), m.mz());
  const Matrix k_xz = sx * m.e().transpose() * gz.inverse();
  cv.k_xz = k_xz;
  cv.sigma_xz = SymMatrix(symmetrize(sx - k_xz * m.e() * sx));
  cv.sigma_xuz = SymMatrix(spd_inverse(symmetrize(spd_inverse(symmetrize(s)) + pz)));
  // Z = E Y~ + noise with covariance I - E W~ E^T.
  cv.k_yz = w * m.e().transpose();
  cv.k_yx = Matrix::Identity(n, n) - w * pz;
  const Matrix n2 = symmetrize(w - w * pz * w);
  cv.sigma_n2 = SymMatrix(n2);
  const Matrix n3 = spd_inverse(gap);
  cv.sigma_n3 = SymMatrix(n3);
  const auto lu = cv.k_yx.partialPivLu();
  const Matrix left = lu.solve(n2);
  const Matrix n3_alt = symmetrize(lu.solve(left.transpose()).transpose());
  cv.route_gap = relative_residual(n3_alt, n3);
  cv.gamma = (1.0 + mu) / mu;
  return cv;
}

std::map<std::string, double> verify_point(const Point& p, const KktCertificate& cert) {
  const double mu = cert.mu;
  const Matrix& m = cert.m_matrix.matrix();
  const Matrix& prec = cert.wy_tilde_precision;
  const int n = static_cast<int>(p.s.rows());
  const Matrix eye = Matrix::Identity(n, n);
  std::map<std::string, double> r;

  r["stationarity"] = relative_residual(mu * p.s_inv + p.tz, (1.0 + mu) * p.ty + m);
  r["compl_slack_M"] = compl_slack_m(m, p.d);
  r["compl_slack_mu"] = compl_slack_mu(mu, cert.rp, p.rates.rp);

  Matrix h_tilde;
  if (p.aligned && cert.wy_tilde) {
    h_tilde = spd_inverse(symmetrize(p.s + cert.wy_tilde->matrix()));
  } else {
    h_tilde = enhanced_kernel(p.s, prec);
  }
  r["enhancement_def"] = relative_residual((1.0 + mu) * h_tilde, (1.0 + mu) * p.ty + m);

  if (p.aligned && cert.wy_tilde) {
    const Matrix& wt = cert.wy_tilde->matrix();
    const Matrix& wy = p.aligned->sigma_wy().matrix();
    const Matrix& wz = p.aligned->sigma_wz().matrix();
    r["order_wy"] = psd_violation(symmetrize(wy - wt)) / (1.0 + wy.norm());
    r["order_wz"] = psd_violation(symmetrize(wz - wt)) / (1.0 + wz.norm());
    r["preservation"] = relative_residual((p.sx + wt) * h_tilde, (p.sx + wy) * p.ty);
  } else {
    // A larger precision is a smaller noise covariance.
    r["order_wy"] = psd_violation(symmetrize(prec - p.py)) / (1.0 + prec.norm());
    r["order_wz"] = psd_violation(symmetrize(prec - p.pz)) / (1.0 + prec.norm());
    r["preservation"] = relative_residual(eye + p.d * h_tilde, eye + p.d * p.ty);
  }

  double rate_gap = kInf;
  try {
    RatePair enhanced;
    if (p.aligned && cert.wy_tilde) {
      enhanced = rates_enhanced(*p.aligned, *cert.wy_tilde, cert.sigma_star);
    } else if (p.general) {
      enhanced = rates_enhanced_precision(*p.general, prec, p.s);
    } else {
      enhanced = rates_enhanced_precision(to_general(*p.aligned), prec, p.s);
    }
    rate_gap = std::abs(enhanced.rk - p.rates.rk) + std::abs(enhanced.rp - p.rates.rp);
  } catch (const Error&) {
  }
  r["rate_match"] = rate_gap;

  r["proportionality"] = 0.0;
  r["k_invertibility"] = 0.0;
  if (mu > 0.0) {
    try {
      ChangeOfVariable cv = (p.aligned && cert.wy_tilde)
                                ? change_of_variable(*p.aligned, *cert.wy_tilde, cert.sigma_star, mu)
                                : change_general(p.general ? *p.general : to_general(*p.aligned), prec, p.s, mu);
      const Matrix& a = cv.sigma_xuz.matrix();
      const Matrix& b = cv.sigma_n3.matrix();
      const double eq = relative_residual(spd_inverse(a), cv.gamma * spd_inverse(symmetrize(a + b)));
      const double inv_m = 1.0 / n;
      const double da = std::exp(inv_m * log_det(a));
      const double db = std::exp(inv_m * log_det(b));
      const double dab = std::exp(inv_m * log_det(symmetrize(a + b)));
      r["proportionality"] = eq + std::abs(da + db - dab) / dab;
      r["k_invertibility"] = smallest_singular_value(cv.k_yx) > kSingularValueFloor ? 0.0 : 1.0;
    } catch (const Error&) {
      r["proportionality"] = kInf;
      r["k_invertibility"] = 1.0;
    }
  }
  return r;
}

template <class Model>
KktCertificate build_certificate(const Model& m, const Point& p, double rp, double mu, const Matrix& mm,
                                 const Matrix& precision, std::optional<SymMatrix> wy_tilde) {
  KktCertificate cert{ConditionalCov(m.sigma_x(), p.s), rp, mu, SymMatrix(symmetrize(mm)), precision,
                      std::move(wy_tilde), {}};
  cert.residuals = verify_point(p, cert);
  return cert;
}

}  // namespace

double KktCertificate::max_residual() const {
  double worst = 0.0;
  for (const char* key : kResidualKeys) {
    const auto it = residuals.find(key);
    if (it == residuals.end() || std::isnan(it->second)) return kInf;
    worst = std::max(worst, it->second);
  }
  return worst;
}

Multipliers recover_multipliers(const GeneralModel& m, const Matrix& sigma_star, double rp, double tol) {
  Multipliers out = best_multipliers(make_point(m, sigma_star), rp);
  if (!(out.residual <= tol)) {
    throw Error(ErrorCode::NoValidMultiplier, "no multiplier satisfies the optimality conditions");
  }
  return out;
}

Multipliers recover_multipliers(const AlignedModel& m, const ConditionalCov& sigma_star, double rp, double tol) {
  Multipliers out = best_multipliers(make_point(m, sigma_star.matrix()), rp);
  if (!(out.residual <= tol)) {
    throw Error(ErrorCode::NoValidMultiplier, "no multiplier satisfies the optimality conditions");
  }
  return out;
}

SymMatrix enhance(const AlignedModel& m, const ConditionalCov& sigma_star, double mu, const Matrix& m_matrix) {
  check_multipliers(mu, m_matrix);
  const Matrix& s = sigma_star.matrix();
  const Matrix h = spd_inverse(symmetrize(s + m.sigma_wy().matrix())) + symmetrize(m_matrix) / (1.0 + mu);
  return SymMatrix(symmetrize(spd_inverse(symmetrize(h)) - s));
}

Matrix enhance_precision(const GeneralModel& m, const Matrix& sigma_star, double mu, const Matrix& m_matrix) {
  check_multipliers(mu, m_matrix);
  return enhanced_precision(make_point(m, sigma_star), mu, symmetrize(m_matrix));
}

std::map<std::string, double> verify_certificate(const GeneralModel& m, const KktCertificate& cert) {
  return verify_point(make_point(m, cert.sigma_star.matrix()), cert);
}

std::map<std::string, double> verify_certificate(const AlignedModel& m, const KktCertificate& cert) {
  return verify_point(make_point(m, cert.sigma_star.matrix()), cert);
}

ChangeOfVariable change_of_variable(const AlignedModel& m, const SymMatrix& wy_tilde, const ConditionalCov& sigma_star,
                                    double mu) {
  if (!(mu > 0.0)) throw Error(ErrorCode::MuZero, "change of variable needs mu > 0");
  const Matrix& sx = m.sigma_x().matrix();
  const Matrix& wz = m.sigma_wz().matrix();
  const Matrix& wt = wy_tilde.matrix();
  if (min_eigenvalue(symmetrize(wz - wt)) <= kPdFloor) {
    throw Error(ErrorCode::NotDegraded, "enhanced noise is not strictly below sigma_wz");
  }
  const int n = m.dim();
  const Matrix sz = symmetrize(sx + wz);
  const Matrix sy = symmetrize(sx + wt);

  // Block route. Z = Y~ + independent noise, so cov(Y~, Z) = S_y~ and
  // cov(Y~, X) = S_x.
  Matrix joint(2 * n, 2 * n);
  joint << sz, sx, sx, sx;
  Matrix cross(n, 2 * n);
  cross << sy, sx;
  const Eigen::LLT<Matrix> llt(joint);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "joint (Z, X) covariance");
  const Matrix coeff = llt.solve(cross.transpose()).transpose();

  ChangeOfVariable cv;
  const Matrix sz_inv = spd_inverse(sz);
  cv.k_xz = sx * sz_inv;
  cv.sigma_xz = SymMatrix(symmetrize(sx - sx * sz_inv * sx));
  cv.sigma_xuz = SymMatrix(spd_inverse(symmetrize(spd_inverse(sigma_star.matrix()) + spd_inverse(wz))));
  cv.k_yz = coeff.leftCols(n);
  cv.k_yx = coeff.rightCols(n);
  const Matrix n2 = symmetrize(sy - coeff * cross.transpose());
  cv.sigma_n2 = SymMatrix(n2);
  const auto lu = cv.k_yx.partialPivLu();
  const Matrix n3 = symmetrize(lu.solve(lu.solve(n2).transpose()).transpose());
  cv.sigma_n3 = SymMatrix(n3);
  cv.gamma = (1.0 + mu) / mu;

  // Closed forms: K_y~x = I - W~ S_wz^{-1}, N3 = (W~^{-1} - S_wz^{-1})^{-1}.
  const Matrix pz = spd_inverse(wz);
  const Matrix k_alt = Matrix::Identity(n, n) - wt * pz;
  const Matrix n3_alt = spd_inverse(symmetrize(spd_inverse(wt) - pz));
  cv.route_gap = std::max(relative_residual(cv.k_yx, k_alt), relative_residual(n3, n3_alt));
  return cv;
}

ChangeOfVariable change_of_variable(const GeneralModel& m, const Matrix& wy_tilde_precision, const Matrix& sigma_star,
                                    double mu) {
  return change_general(m, wy_tilde_precision, sigma_star, mu);
}

KktCertificate certify(const GeneralModel& m, const Matrix& sigma_star, double rp) {
  const Point p = make_point(m, sigma_star);
  const Multipliers mult = best_multipliers(p, rp);
  const Matrix prec = enhanced_precision(p, mult.mu, mult.m);
  std::optional<SymMatrix> wy_tilde;
  if (is_pd(prec)) wy_tilde = SymMatrix(spd_inverse(prec));
  return build_certificate(m, p, rp, mult.mu, mult.m, prec, std::move(wy_tilde));
}

KktCertificate certify(const AlignedModel& m, const ConditionalCov& sigma_star, double rp) {
  const Point p = make_point(m, sigma_star.matrix());
  const Multipliers mult = best_multipliers(p, rp);
  const Matrix h = p.ty + mult.m / (1.0 + mult.mu);
  const Matrix wt = symmetrize(spd_inverse(symmetrize(h)) - p.s);
  std::optional<SymMatrix> wy_tilde;
  Matrix prec = enhanced_precision(p, mult.mu, mult.m);
  if (is_pd(wt)) {
    wy_tilde = SymMatrix(wt);
    prec = spd_inverse(wt);
  }
  return build_certificate(m, p, rp, mult.mu, mult.m, prec, std::move(wy_tilde));
}

nlohmann::json certificate_to_json(const KktCertificate& cert) {
  nlohmann::json j;
  j["sigma_star"] = matrix_to_json(cert.sigma_star.matrix());
  j["rp"] = cert.rp;
  j["mu"] = cert.mu;
  j["m_matrix"] = matrix_to_json(cert.m_matrix.matrix());
  j["wy_tilde_precision"] = matrix_to_json(cert.wy_tilde_precision);
  j["wy_tilde"] = cert.wy_tilde ? matrix_to_json(cert.wy_tilde->matrix()) : nlohmann::json(nullptr);
  nlohmann::json res = nlohmann::json::object();
  for (const char* key : kResidualKeys) {
    const auto it = cert.residuals.find(key);
    const double v = it == cert.residuals.end() ? kInf : it->second;
    // JSON has no infinity; report non-finite residuals as null.
    res[key] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  }
  j["residuals"] = res;
  const double worst = cert.max_residual();
  j["max_residual"] = std::isfinite(worst) ? nlohmann::json(worst) : nlohmann::json(nullptr);
  return j;
}

}  // namespace keyrate
