#pragma once

// Rate functionals of the Gaussian characterization of the one-way
// key-agreement region. All rates are in nats per source symbol.

#include "keyrate/model.hpp"

namespace keyrate {

inline constexpr double kNatsToBits = 1.4426950408889634;  // 1 / ln 2

struct RatePair {
  double rp = 0.0;  // public-communication rate, >= 0
  double rk = 0.0;  // key rate; may be negative before clamping
};

/// (I_p, I_k) for the general model:
///   I_p = 1/2 log|S_x / Q| - 1/2 log|(B S_x B^T + I) / (B Q B^T + I)|
///   I_k = 1/2 log|(B S_x B^T + I) / (B Q B^T + I)| - 1/2 log|(E S_x E^T + I) / (E Q E^T + I)|
/// Throws InvalidConditionalCov if q does not belong to m.
RatePair rates_general(const GeneralModel& m, const ConditionalCov& q);

/// (I_p, I_k) for the aligned model, with (S + S_wy) in place of (B S B^T + I).
RatePair rates_aligned(const AlignedModel& m, const ConditionalCov& q);

/// Aligned functionals with S_wy replaced by an enhanced noise covariance
/// 0 < wy_tilde <= sigma_wy. Throws InvalidEnhancedNoise.
RatePair rates_enhanced(const AlignedModel& m, const SymMatrix& wy_tilde, const ConditionalCov& q);

/// Enhanced functionals for a general model where the enhanced noise is given
/// by its precision (inverse covariance, PSD, possibly singular).
RatePair rates_enhanced_precision(const GeneralModel& m, const Matrix& wy_tilde_precision, const Matrix& q);

/// lim_{R_p -> inf} R_k(R_p) = 1/2 sum_{phi_i > 1} ln phi_i.
double asymptotic_limit(const GeneralModel& m);

/// I(X;Y) - I(X;Z): the key rate of the degenerate choice Q -> 0.
double mutual_information_gap(const GeneralModel& m);

namespace detail {

/// Unchecked general-model functionals on a raw SPD q.
RatePair rates_general_raw(const GeneralModel& m, const Matrix& q);

/// log|R K R^T + I|.
double log_det_signal(const Matrix& gain, const Matrix& k);
/// Gradient of log_det_signal in K: R^T (R K R^T + I)^{-1} R.
Matrix signal_kernel(const Matrix& gain, const Matrix& k);

/// The model in S_x-whitened coordinates, Q = S_x^{1/2} K S_x^{1/2}, 0 < K <= I.
/// Used by all solvers; cheap to evaluate many times.
struct Whitened {
  explicit Whitened(const GeneralModel& m);

  int dim;
  Matrix root;      // S_x^{1/2}
  Matrix root_inv;  // S_x^{-1/2}
  Matrix ry;        // B S_x^{1/2}
  Matrix rz;        // E S_x^{1/2}
  double ld_y_full;  // log|ry ry^T + I|
  double ld_z_full;  // log|rz rz^T + I|

  Matrix to_sigma(const Matrix& k) const { return symmetrize(root * k * root); }
  Matrix to_k(const Matrix& sigma) const { return symmetrize(root_inv * sigma * root_inv); }

  /// Returns false when K is not positive definite.
  bool rates(const Matrix& k, RatePair& out) const;
};

}  // namespace detail
}  // namespace keyrate
