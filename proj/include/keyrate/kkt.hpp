#pragma once

// KKT certificates for boundary points of the key-rate region.
//
// With T_y(S) = B^T (B S B^T + I)^{-1} B (= (S + S_wy)^{-1} for aligned models)
// and T_z likewise, a point S* on the boundary at rate budget rp satisfies
//
//   mu S*^{-1} + T_z(S*) = (1 + mu) T_y(S*) + M,   M (S_x - S*) = 0,
//   mu (rp - I_p(S*)) = 0,   mu >= 0,   M >= 0.
//
// The enhanced noise W~ is defined by (1 + mu)(S* + W~)^{-1} = (1 + mu) T_y + M.
// General models with singular B or E have no noise covariance, so W~ is
// carried as its precision P~ = W~^{-1}; aligned models also get W~ itself.

#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "keyrate/model.hpp"
#include "keyrate/rates.hpp"

namespace keyrate {

inline constexpr double kCertTol = 1e-6;

struct Multipliers {
  double mu = 0.0;
  Matrix m;                 // PSD
  double residual = 0.0;    // composite: PSD violation + complementarity terms
};

/// Picks mu >= 0 minimizing the composite residual over the closed-form
/// candidates: 0, the least-squares solution of M(mu) D = 0, and the smallest
/// mu making M(mu) PSD. Throws NoValidMultiplier if the best exceeds `tol`.
Multipliers recover_multipliers(const GeneralModel& m, const Matrix& sigma_star, double rp, double tol = kCertTol);
Multipliers recover_multipliers(const AlignedModel& m, const ConditionalCov& sigma_star, double rp,
                                double tol = kCertTol);

/// W~ = (1+mu) [(1+mu)(S* + S_wy)^{-1} + M]^{-1} - S*. Throws NonPsdInput.
SymMatrix enhance(const AlignedModel& m, const ConditionalCov& sigma_star, double mu, const Matrix& m_matrix);
/// P~ = (I - H S*)^{-1} H with H = T_y(S*) + M/(1+mu). Throws NonPsdInput.
Matrix enhance_precision(const GeneralModel& m, const Matrix& sigma_star, double mu, const Matrix& m_matrix);

/// Residual keys, in report order.
inline const char* const kResidualKeys[] = {
    "stationarity", "compl_slack_M", "compl_slack_mu", "enhancement_def", "order_wy",
    "order_wz",     "preservation",  "rate_match",     "proportionality", "k_invertibility"};

struct KktCertificate {
  ConditionalCov sigma_star;
  double rp;
  double mu;
  SymMatrix m_matrix;
  Matrix wy_tilde_precision;
  std::optional<SymMatrix> wy_tilde;  // present when the precision is invertible
  std::map<std::string, double> residuals;

  double max_residual() const;
};

struct ChangeOfVariable {
  SymMatrix sigma_xz;   // S_{x|z} (N1)
  SymMatrix sigma_xuz;  // S*_{x|uz} = (S*^{-1} + P_z)^{-1}
  Matrix k_xz;
  Matrix k_yx;          // K_{y~x}
  Matrix k_yz;          // K_{y~z}
  SymMatrix sigma_n2;   // S_{y~|xz}
  SymMatrix sigma_n3;   // K_{y~x}^{-1} N2 K_{y~x}^{-T}
  double gamma;         // (1 + mu) / mu
  double route_gap;     // disagreement between the two independent constructions
};

/// Every named residual. Orderings are checked on covariances for aligned
/// models and on precisions for general ones.
std::map<std::string, double> verify_certificate(const GeneralModel& m, const KktCertificate& cert);
std::map<std::string, double> verify_certificate(const AlignedModel& m, const KktCertificate& cert);

/// Aligned route: block inversion of the (Z, X) covariance with
/// cov(Y~, Z) = S_x + W~, cross-checked against the closed forms
/// K_{y~x} = I - W~ S_wz^{-1}, N3 = (W~^{-1} - S_wz^{-1})^{-1}.
/// Throws MuZero or NotDegraded (W~ not strictly below S_wz).
ChangeOfVariable change_of_variable(const AlignedModel& m, const SymMatrix& wy_tilde,
                                    const ConditionalCov& sigma_star, double mu);
/// Precision route for general models: closed forms, cross-checked against
/// N3 = K^{-1} N2 K^{-T}.
ChangeOfVariable change_of_variable(const GeneralModel& m, const Matrix& wy_tilde_precision,
                                    const Matrix& sigma_star, double mu);

/// recover -> enhance -> verify. Never throws for non-optimal points; a
/// failed multiplier recovery is reported through the residuals instead.
KktCertificate certify(const GeneralModel& m, const Matrix& sigma_star, double rp);
KktCertificate certify(const AlignedModel& m, const ConditionalCov& sigma_star, double rp);

nlohmann::json certificate_to_json(const KktCertificate& cert);

}  // namespace keyrate
