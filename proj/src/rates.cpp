#include "keyrate/rates.hpp"

#include <cmath>

#include "keyrate/error.hpp"

namespace keyrate {
namespace detail {

double log_det_signal(const Matrix& gain, const Matrix& k) {
  const Matrix s = gain * k * gain.transpose() + Matrix::Identity(gain.rows(), gain.rows());
  return log_det(symmetrize(s));
}

Matrix signal_kernel(const Matrix& gain, const Matrix& k) {
  const Matrix s = symmetrize(gain * k * gain.transpose()) + Matrix::Identity(gain.rows(), gain.rows());
  Eigen::LLT<Matrix> llt(s);
  return symmetrize(gain.transpose() * llt.solve(gain));
}

RatePair rates_general_raw(const GeneralModel& m, const Matrix& q) {
  const Matrix& sx = m.sigma_x().matrix();
  const double y_ratio = log_det_signal(m.b(), sx) - log_det_signal(m.b(), q);
  const double z_ratio = log_det_signal(m.e(), sx) - log_det_signal(m.e(), q);
  RatePair out;
  out.rp = 0.5 * (log_det(sx) - log_det(q)) - 0.5 * y_ratio;
  out.rk = 0.5 * y_ratio - 0.5 * z_ratio;
  return out;
}

Whitened::Whitened(const GeneralModel& m)
    : dim(m.mx()),
      root(sqrtm_psd(m.sigma_x().matrix())),
      root_inv(inv_sqrtm_spd(m.sigma_x().matrix())),
      ry(m.b() * root),
      rz(m.e() * root),
      ld_y_full(log_det_signal(ry, Matrix::Identity(dim, dim))),
      ld_z_full(log_det_signal(rz, Matrix::Identity(dim, dim))) {}

bool Whitened::rates(const Matrix& k, RatePair& out) const {
  double ld_k = 0.0;
  if (!try_log_det(k, ld_k)) return false;
  const double ly = log_det_signal(ry, k);
  const double lz = log_det_signal(rz, k);
  out.rp = -0.5 * ld_k - 0.5 * ld_y_full + 0.5 * ly;
  out.rk = 0.5 * (ld_y_full - ly) - 0.5 * (ld_z_full - lz);
  return true;
}

}  // namespace detail

RatePair rates_general(const GeneralModel& m, const ConditionalCov& q) {
  if (q.value().dim() != m.mx() || !is_psd(m.sigma_x().matrix() - q.matrix())) {
    throw Error(ErrorCode::InvalidConditionalCov, "conditional covariance does not belong to this model");
  }
  return detail::rates_general_raw(m, q.matrix());
}

namespace {

RatePair aligned_functionals(const Matrix& sx, const Matrix& wy, const Matrix& wz, const Matrix& q) {
  const double y_ratio = log_det(sx + wy) - log_det(q + wy);
  const double z_ratio = log_det(sx + wz) - log_det(q + wz);
  RatePair out;
  out.rp = 0.5 * (log_det(sx) - log_det(q)) - 0.5 * y_ratio;
  out.rk = 0.5 * y_ratio - 0.5 * z_ratio;
  return out;
}

void check_belongs(const AlignedModel& m, const ConditionalCov& q) {
  if (q.value().dim() != m.dim() || !is_psd(m.sigma_x().matrix() - q.matrix())) {
    throw Error(ErrorCode::InvalidConditionalCov, "conditional covariance does not belong to this model");
  }
}

}  // namespace

RatePair rates_aligned(const AlignedModel& m, const ConditionalCov& q) {
  check_belongs(m, q);
  return aligned_functionals(m.sigma_x().matrix(), m.sigma_wy().matrix(), m.sigma_wz().matrix(), q.matrix());
}

RatePair rates_enhanced(const AlignedModel& m, const SymMatrix& wy_tilde, const ConditionalCov& q) {
  check_belongs(m, q);
  if (wy_tilde.dim() != m.dim() || min_eigenvalue(wy_tilde.matrix()) <= kPdFloor ||
      !is_psd(m.sigma_wy().matrix() - wy_tilde.matrix())) {
    throw Error(ErrorCode::InvalidEnhancedNoise, "enhanced noise must satisfy 0 < wy_tilde <= sigma_wy");
  }
  return aligned_functionals(m.sigma_x().matrix(), wy_tilde.matrix(), m.sigma_wz().matrix(), q.matrix());
}

RatePair rates_enhanced_precision(const GeneralModel& m, const Matrix& wy_tilde_precision, const Matrix& q) {
  if (!is_psd(wy_tilde_precision)) {
    throw Error(ErrorCode::InvalidEnhancedNoise, "enhanced noise precision must be PSD");
  }
  // |(S_x + W)/(Q + W)| = |I + G S_x G^T| / |I + G Q G^T| for any G with G^T G = W^{-1}.
  const GeneralModel enhanced(m.sigma_x().matrix(), sqrtm_psd(wy_tilde_precision), m.e());
  return detail::rates_general_raw(enhanced, q);
}

double asymptotic_limit(const GeneralModel& m) {
  const GenEigResult ge = gen_eigs(m);
  double acc = 0.0;
  for (int i = 0; i < ge.rho; ++i) acc += std::log(ge.phis[i]);
  return 0.5 * acc;
}

double mutual_information_gap(const GeneralModel& m) {
  const Matrix& sx = m.sigma_x().matrix();
  return 0.5 * detail::log_det_signal(m.b(), sx) - 0.5 * detail::log_det_signal(m.e(), sx);
}

}  // namespace keyrate
