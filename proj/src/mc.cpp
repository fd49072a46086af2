#include "keyrate/mc.hpp"

#include <cmath>

#include "keyrate/error.hpp"
#include "keyrate/parallel.hpp"
#include "keyrate/philox.hpp"
#include "keyrate/rates.hpp"

namespace keyrate {
namespace {

constexpr double kDegenerateRel = 1e-5;

struct Moments {
  std::size_t count = 0;
  Vector sum;
  Matrix outer;
};

Matrix sampling_factor(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Singular but PSD: symmetric root.
  return sqrtm_psd(cov);
}

Matrix covariance_of(const Moments& mo) {
  const double n = static_cast<double>(mo.count);
  const Vector mean = mo.sum / n;
  return symmetrize((mo.outer - n * mean * mean.transpose()) / (n - 1.0));
}

double block_log_det(const Matrix& cov, const std::vector<int>& idx) {
  Matrix sub(idx.size(), idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t c = 0; c < idx.size(); ++c) sub(r, c) = cov(idx[r], idx[c]);
  }
  double out = 0.0;
  if (!try_log_det(sub, out)) throw Error(ErrorCode::SingularEmpiricalCov, "covariance block is singular");
  return out;
}

std::vector<int> range(int start, int len) {
  std::vector<int> v(len);
  for (int i = 0; i < len; ++i) v[i] = start + i;
  return v;
}

std::vector<int> join(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// I(A;B) = 1/2 (log|S_A| + log|S_B| - log|S_AB|).
double mutual_information(const Matrix& cov, const std::vector<int>& a, const std::vector<int>& b) {
  return 0.5 * (block_log_det(cov, a) + block_log_det(cov, b) - block_log_det(cov, join(a, b)));
}

}  // namespace

JointGaussian build_joint(const GeneralModel& m, const ConditionalCov& q) {
  const Matrix& sx = m.sigma_x().matrix();
  const Matrix& qm = q.matrix();
  if (min_eigenvalue(symmetrize(sx - qm)) <= kDegenerateRel * max_eigenvalue(sx)) {
    throw Error(ErrorCode::DegenerateConditional, "q is too close to sigma_x for a finite auxiliary noise");
  }
  const Matrix sv = spd_inverse(symmetrize(spd_inverse(qm) - spd_inverse(sx)));
  const Matrix& b = m.b();
  const Matrix& e = m.e();
  const int nx = m.mx(), ny = m.my(), nz = m.mz();
  const int d = 2 * nx + ny + nz;
  Matrix c = Matrix::Zero(d, d);
  const int oy = nx, oz = nx + ny, ou = nx + ny + nz;
  c.block(0, 0, nx, nx) = sx;
  c.block(0, oy, nx, ny) = sx * b.transpose();
  c.block(0, oz, nx, nz) = sx * e.transpose();
  c.block(0, ou, nx, nx) = sx;
  c.block(oy, oy, ny, ny) = b * sx * b.transpose() + Matrix::Identity(ny, ny);
  c.block(oy, oz, ny, nz) = b * sx * e.transpose();
  c.block(oy, ou, ny, nx) = b * sx;
  c.block(oz, oz, nz, nz) = e * sx * e.transpose() + Matrix::Identity(nz, nz);
  c.block(oz, ou, nz, nx) = e * sx;
  c.block(ou, ou, nx, nx) = sx + sv;
  c.triangularView<Eigen::StrictlyLower>() = c.transpose().triangularView<Eigen::StrictlyLower>();
  return JointGaussian{SymMatrix(symmetrize(c)), nx, ny, nz, nx};
}

SampleBatch sample(const JointGaussian& joint, std::size_t n, std::uint64_t seed, int threads) {
  if (n < static_cast<std::size_t>(2 * kMcFolds)) {
    throw Error(ErrorCode::InvalidArgument, "need at least two draws per fold");
  }
  const Matrix& cov = joint.cov.matrix();
  if (!is_psd(cov)) throw Error(ErrorCode::NotPsd, "joint covariance is not positive semidefinite");
  const Matrix factor = sampling_factor(cov);
  const int d = static_cast<int>(cov.rows());

  std::vector<Moments> folds(kMcFolds);
  parallel_for(kMcFolds, resolve_thread_count(threads), [&](std::size_t f) {
    const std::size_t count = n / kMcFolds + (f < n % kMcFolds ? 1 : 0);
    PhiloxStream rng(seed, f);
    Moments mo;
    mo.count = count;
    mo.sum = Vector::Zero(d);
    mo.outer = Matrix::Zero(d, d);
    Vector z(d);
    for (std::size_t i = 0; i < count; ++i) {
      for (int k = 0; k < d; ++k) z(k) = rng.normal();
      const Vector x = factor * z;
      mo.sum += x;
      mo.outer.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    mo.outer = mo.outer.selfadjointView<Eigen::Lower>();
    folds[f] = std::move(mo);
  });

  SampleBatch batch;
  batch.n = n;
  batch.seed = seed;
  batch.mx = joint.mx;
  batch.my = joint.my;
  batch.mz = joint.mz;
  batch.mu = joint.mu;
  Moments pooled{0, Vector::Zero(d), Matrix::Zero(d, d)};
  for (const Moments& mo : folds) {
    pooled.count += mo.count;
    pooled.sum += mo.sum;
    pooled.outer += mo.outer;
    batch.fold_covs.emplace_back(covariance_of(mo));
  }
  batch.joint_cov_empirical = SymMatrix(covariance_of(pooled));
  return batch;
}

RatePair plug_in_rates(const SymMatrix& cov, int mx, int my, int mz, int mu) {
  const Matrix& c = cov.matrix();
  const std::vector<int> x = range(0, mx), y = range(mx, my), z = range(mx + my, mz), u = range(mx + my + mz, mu);
  const double iux = mutual_information(c, u, x);
  const double iuy = mutual_information(c, u, y);
  const double iuz = mutual_information(c, u, z);
  return RatePair{iux - iuy, iuy - iuz};
}

RateEstimate estimate_rates(const SampleBatch& batch) {
  if (batch.n < 2 || batch.fold_covs.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "standard errors need at least two folds of two draws");
  }
  const RatePair pooled = plug_in_rates(batch.joint_cov_empirical, batch.mx, batch.my, batch.mz, batch.mu);
  const double k = static_cast<double>(batch.fold_covs.size());
  double mean_p = 0.0, mean_k = 0.0, sq_p = 0.0, sq_k = 0.0;
  std::vector<RatePair> per_fold;
  for (const SymMatrix& fc : batch.fold_covs) {
    per_fold.push_back(plug_in_rates(fc, batch.mx, batch.my, batch.mz, batch.mu));
    mean_p += per_fold.back().rp / k;
    mean_k += per_fold.back().rk / k;
  }
  for (const RatePair& r : per_fold) {
    sq_p += (r.rp - mean_p) * (r.rp - mean_p);
    sq_k += (r.rk - mean_k) * (r.rk - mean_k);
  }
  // Standard error of the pooled estimate: fold spread / sqrt(folds).
  RateEstimate out;
  out.rp = MiEstimate{pooled.rp, std::sqrt(sq_p / (k - 1.0) / k)};
  out.rk = MiEstimate{pooled.rk, std::sqrt(sq_k / (k - 1.0) / k)};
  return out;
}

}  // namespace keyrate
