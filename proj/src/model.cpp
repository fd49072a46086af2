#include "keyrate/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "keyrate/error.hpp"

namespace keyrate {
namespace {

SymMatrix require_pd(const Matrix& a, const char* name) {
  SymMatrix s(a);
  if (!is_pd(s.matrix())) {
    throw Error(ErrorCode::NotPositiveDefinite, std::string(name) + " is not positive definite");
  }
  return s;
}

double condition_number(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

constexpr double kMaxCondition = 1e12;

}  // namespace

GeneralModel::GeneralModel(const Matrix& sigma_x, const Matrix& b, const Matrix& e) {
  if (sigma_x.rows() != sigma_x.cols() || sigma_x.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "sigma_x must be square");
  }
  sigma_x_ = require_pd(sigma_x, "sigma_x");
  const Eigen::Index mx = sigma_x.rows();
  if (b.cols() != mx || b.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch,
                "b must be m_y x " + std::to_string(mx) + ", got " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
  if (e.cols() != mx || e.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch,
                "e must be m_z x " + std::to_string(mx) + ", got " + std::to_string(e.rows()) + "x" +
                    std::to_string(e.cols()));
  }
  if (!b.allFinite() || !e.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "observation matrices have non-finite entries");
  }
  b_ = b;
  e_ = e;
}

AlignedModel::AlignedModel(const Matrix& sigma_x, const Matrix& sigma_wy, const Matrix& sigma_wz) {
  if (sigma_x.rows() != sigma_x.cols() || sigma_wy.rows() != sigma_x.rows() ||
      sigma_wy.cols() != sigma_x.cols() || sigma_wz.rows() != sigma_x.rows() ||
      sigma_wz.cols() != sigma_x.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "aligned model covariances must share one square shape");
  }
  sigma_x_ = require_pd(sigma_x, "sigma_x");
  sigma_wy_ = require_pd(sigma_wy, "sigma_wy");
  sigma_wz_ = require_pd(sigma_wz, "sigma_wz");
}

ConditionalCov::ConditionalCov(const SymMatrix& sigma_x, const Matrix& value) {
  if (value.rows() != sigma_x.dim() || value.cols() != sigma_x.dim()) {
    throw Error(ErrorCode::InvalidConditionalCov, "conditional covariance has the wrong shape");
  }
  try {
    value_ = SymMatrix(value);
  } catch (const Error& err) {
    throw Error(ErrorCode::InvalidConditionalCov, err.what());
  }
  if (min_eigenvalue(value_.matrix()) <= kPdFloor) {
    throw Error(ErrorCode::InvalidConditionalCov, "conditional covariance is not positive definite");
  }
  if (!is_psd(sigma_x.matrix() - value_.matrix())) {
    throw Error(ErrorCode::InvalidConditionalCov, "conditional covariance exceeds sigma_x");
  }
}

AlignedModel to_aligned(const GeneralModel& m) {
  const int mx = m.mx();
  if (m.my() != mx || m.mz() != mx) {
    throw Error(ErrorCode::NotSquare, "aligned reduction needs m_x = m_y = m_z");
  }
  if (condition_number(m.b()) >= kMaxCondition) throw Error(ErrorCode::NearSingular, "B is near singular");
  if (condition_number(m.e()) >= kMaxCondition) throw Error(ErrorCode::NearSingular, "E is near singular");
  const Matrix b_inv = m.b().partialPivLu().inverse();
  const Matrix e_inv = m.e().partialPivLu().inverse();
  return AlignedModel(m.sigma_x().matrix(), symmetrize(b_inv * b_inv.transpose()),
                      symmetrize(e_inv * e_inv.transpose()));
}

GeneralModel to_general(const AlignedModel& m) {
  const int n = m.dim();
  const Matrix ly = cholesky_lower(m.sigma_wy().matrix());
  const Matrix lz = cholesky_lower(m.sigma_wz().matrix());
  const Matrix b = ly.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  const Matrix e = lz.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  return GeneralModel(m.sigma_x().matrix(), b, e);
}

Matrix pad_observation(const Matrix& m, int mx) {
  const Eigen::Index k = m.rows();
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  Vector diag = Vector::Zero(mx);
  for (Eigen::Index i = 0; i < sv.size(); ++i) diag(i) = sv(i);
  Matrix u_pad = Matrix::Identity(mx, mx);
  if (k <= mx) u_pad.topLeftCorner(k, k) = svd.matrixU();
  return u_pad * diag.asDiagonal() * svd.matrixV().transpose();
}

GeneralModel equivalent_square(const GeneralModel& m) {
  if (m.my() == m.mx() && m.mz() == m.mx()) return m;
  const Matrix b = (m.my() == m.mx()) ? m.b() : pad_observation(m.b(), m.mx());
  const Matrix e = (m.mz() == m.mx()) ? m.e() : pad_observation(m.e(), m.mx());
  return GeneralModel(m.sigma_x().matrix(), b, e);
}

namespace {

Matrix lift_singular_values(const Matrix& square, double alpha) {
  Eigen::JacobiSVD<Matrix> svd(square, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector lifted = svd.singularValues().array() + alpha;
  return svd.matrixU() * lifted.asDiagonal() * svd.matrixV().transpose();
}

double half_log_det_signal(const Matrix& gain, const Matrix& sigma_x) {
  const Matrix s = gain * sigma_x * gain.transpose() + Matrix::Identity(gain.rows(), gain.rows());
  return 0.5 * log_det(symmetrize(s));
}

}  // namespace

PerturbedPair perturb_svd(const GeneralModel& m, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::NonPositiveAlpha, "alpha must be a positive finite number");
  }
  const GeneralModel square = equivalent_square(m);
  const Matrix b_bar = lift_singular_values(square.b(), alpha);
  const Matrix e_bar = lift_singular_values(square.e(), alpha);
  GeneralModel bar(m.sigma_x().matrix(), b_bar, e_bar);
  const Matrix& sx = m.sigma_x().matrix();
  const double gap = std::max(0.0, half_log_det_signal(e_bar, sx) - half_log_det_signal(m.e(), sx));
  return PerturbedPair{std::move(bar), alpha, gap};
}

GenEigResult gen_eigs(const GeneralModel& m) {
  const Matrix root = sqrtm_psd(m.sigma_x().matrix());
  const Matrix by = m.b() * root;
  const Matrix ez = m.e() * root;
  const Matrix id = Matrix::Identity(m.mx(), m.mx());
  const Matrix a = symmetrize(by.transpose() * by) + id;
  const Matrix c = symmetrize(ez.transpose() * ez) + id;
  const Vector phis = generalized_eigenvalues(a, c);
  GenEigResult out;
  out.phis.assign(phis.data(), phis.data() + phis.size());
  out.rho = static_cast<int>(std::count_if(out.phis.begin(), out.phis.end(),
                                           [](double p) { return p > 1.0 + kRhoTol; }));
  return out;
}

}  // namespace keyrate
