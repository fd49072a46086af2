#pragma once

// Source models for one-way key agreement from vector Gaussian sources.
//
//   general:  Y = B X + W_y,  Z = E X + W_z,   W_y ~ N(0, I), W_z ~ N(0, I)
//   aligned:  Y = X + W_y,    Z = X + W_z,     W_y ~ N(0, S_wy), W_z ~ N(0, S_wz)
//
// Both are immutable value types whose constructors enforce every invariant
// (constructing one is the validation step).

#include <vector>

#include "keyrate/linalg.hpp"

namespace keyrate {

class GeneralModel {
 public:
  /// Throws NotPositiveDefinite (sigma_x), DimensionMismatch or AsymmetricInput.
  GeneralModel(const Matrix& sigma_x, const Matrix& b, const Matrix& e);

  const SymMatrix& sigma_x() const { return sigma_x_; }
  const Matrix& b() const { return b_; }
  const Matrix& e() const { return e_; }
  int mx() const { return sigma_x_.dim(); }
  int my() const { return static_cast<int>(b_.rows()); }
  int mz() const { return static_cast<int>(e_.rows()); }

 private:
  SymMatrix sigma_x_;
  Matrix b_;
  Matrix e_;
};

class AlignedModel {
 public:
  /// All three covariances must be symmetric positive definite of equal size.
  AlignedModel(const Matrix& sigma_x, const Matrix& sigma_wy, const Matrix& sigma_wz);

  const SymMatrix& sigma_x() const { return sigma_x_; }
  const SymMatrix& sigma_wy() const { return sigma_wy_; }
  const SymMatrix& sigma_wz() const { return sigma_wz_; }
  int dim() const { return sigma_x_.dim(); }

 private:
  SymMatrix sigma_x_;
  SymMatrix sigma_wy_;
  SymMatrix sigma_wz_;
};

/// Candidate conditional covariance of X given the auxiliary U:
/// 0 < value <= sigma_x (min eig > 1e-10, sigma_x - value PSD within 1e-10).
class ConditionalCov {
 public:
  /// Throws InvalidConditionalCov.
  ConditionalCov(const SymMatrix& sigma_x, const Matrix& value);

  const SymMatrix& value() const { return value_; }
  const Matrix& matrix() const { return value_.matrix(); }

 private:
  SymMatrix value_;
};

struct GenEigResult {
  std::vector<double> phis;  // descending
  int rho = 0;               // number of phis strictly above one
};

struct PerturbedPair {
  GeneralModel model_bar;
  double alpha;
  double gap;  // nats; upper edge of the vertical slack set for this alpha
};

/// Generalized eigenvalues at or below 1 + kRhoTol count as "not above one".
inline constexpr double kRhoTol = 1e-12;

/// Aligned equivalent of a square model with invertible B, E:
/// sigma_wy = B^{-1} B^{-T}, sigma_wz = E^{-1} E^{-T}.
/// Throws NotSquare or NearSingular (condition number >= 1e12).
AlignedModel to_aligned(const GeneralModel& m);

/// Inverse map: B = L_y^{-1}, E = L_z^{-1} with L the Cholesky factors of the
/// noise covariances, so B^T B = sigma_wy^{-1}.
GeneralModel to_general(const AlignedModel& m);

/// Replaces a k x m_x observation matrix by an m_x x m_x matrix with the same
/// Gram matrix M^T M (hence the same rate functionals):
///   M = U S V^T (full SVD)  ->  U_pad diag(s_1..s_r, 0..0) V^T,
/// U_pad = U when k = m_x, blockdiag(U, I) when k < m_x, I when k > m_x.
Matrix pad_observation(const Matrix& m, int mx);

/// The source model with both observation matrices padded to m_x x m_x.
GeneralModel equivalent_square(const GeneralModel& m);

/// B-bar = U_y (L_y + alpha I) V_y^T, E-bar = U_z (L_z + alpha I) V_z^T on the
/// padded model, plus the gap 1/2 log|E-bar S_x E-bar^T + I| - 1/2 log|E S_x E^T + I|.
/// Throws NonPositiveAlpha.
PerturbedPair perturb_svd(const GeneralModel& m, double alpha);

/// Generalized eigenvalues of (S^1/2 B^T B S^1/2 + I, S^1/2 E^T E S^1/2 + I).
GenEigResult gen_eigs(const GeneralModel& m);

}  // namespace keyrate
