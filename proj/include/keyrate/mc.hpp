#pragma once

// Monte-Carlo cross-check of the rate functionals with a Gaussian auxiliary
// U = X + V, V ~ N(0, (Q^{-1} - S_x^{-1})^{-1}), so that Cov(X | U) = Q.
// Mutual informations are plug-in Gaussian estimates from empirical
// covariance blocks; standard errors come from 10 independent folds.

#include <cstdint>
#include <vector>

#include "keyrate/model.hpp"
#include "keyrate/rates.hpp"

namespace keyrate {

/// Covariance of the stacked vector (X, Y, Z, U).
struct JointGaussian {
  SymMatrix cov;
  int mx = 0, my = 0, mz = 0, mu = 0;
};

struct SampleBatch {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  SymMatrix joint_cov_empirical;        // pooled over all folds
  std::vector<SymMatrix> fold_covs;     // one per fold
  int mx = 0, my = 0, mz = 0, mu = 0;
};

struct MiEstimate {
  double value = 0.0;      // nats
  double std_error = 0.0;
};

struct RateEstimate {
  MiEstimate rp;  // I(U;X) - I(U;Y)
  MiEstimate rk;  // I(U;Y) - I(U;Z)
};

inline constexpr int kMcFolds = 10;

/// Throws DegenerateConditional when min eig(S_x - q) <= 1e-5 max eig(S_x).
JointGaussian build_joint(const GeneralModel& m, const ConditionalCov& q);

/// n draws split into kMcFolds folds; fold f uses Philox stream f of `seed`.
/// Throws NotPsd or InvalidArgument (n < 2 * kMcFolds).
SampleBatch sample(const JointGaussian& joint, std::size_t n, std::uint64_t seed, int threads = 0);

/// Throws SingularEmpiricalCov.
RateEstimate estimate_rates(const SampleBatch& batch);

/// The same plug-in arithmetic on an exact covariance (no sampling error).
RatePair plug_in_rates(const SymMatrix& cov, int mx, int my, int mz, int mu);

}  // namespace keyrate
