#include "keyrate/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "keyrate/error.hpp"

namespace keyrate {

SymMatrix::SymMatrix(const Matrix& entries) {
  if (entries.rows() < 1 || entries.rows() != entries.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "symmetric matrix must be square with dim >= 1");
  }
  if (!entries.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "matrix has non-finite entries");
  }
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const double skew = (entries - entries.transpose()).cwiseAbs().maxCoeff();
  if (skew > kSymmetryTol * scale) {
    throw Error(ErrorCode::AsymmetricInput, "matrix is not symmetric (max skew " + std::to_string(skew) + ")");
  }
  entries_ = symmetrize(entries);
}

SymMatrix SymMatrix::identity(int dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

SymMatrix SymMatrix::scaled_identity(int dim, double value) {
  return SymMatrix(value * Matrix::Identity(dim, dim));
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Vector sym_eigenvalues(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double min_eigenvalue(const Matrix& a) { return sym_eigenvalues(a).minCoeff(); }
double max_eigenvalue(const Matrix& a) { return sym_eigenvalues(a).maxCoeff(); }

bool is_psd(const Matrix& a) {
  const Vector ev = sym_eigenvalues(a);
  return ev.minCoeff() >= -kPsdTol * (1.0 + ev.cwiseAbs().maxCoeff());
}

bool is_pd(const Matrix& a) { return min_eigenvalue(a) > kPdFloor; }

double psd_violation(const Matrix& a) { return std::max(0.0, -min_eigenvalue(a)); }

bool try_log_det(const Matrix& a, double& out) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  const auto& l = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double d = l(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    acc += std::log(d);
  }
  out = 2.0 * acc;
  return true;
}

double log_det(const Matrix& a) {
  double out = 0.0;
  if (!try_log_det(a, out)) {
    throw Error(ErrorCode::NotPositiveDefinite, "log-det argument is not positive definite");
  }
  return out;
}

Matrix spd_inverse(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "cannot invert a matrix that is not positive definite");
  }
  return symmetrize(llt.solve(Matrix::Identity(a.rows(), a.cols())));
}

Matrix sqrtm_psd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrize(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose());
}

Matrix inv_sqrtm_spd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::NotPositiveDefinite, "inverse square root needs a positive definite matrix");
  }
  const Vector r = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return symmetrize(es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose());
}

Matrix cholesky_lower(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  }
  return llt.matrixL();
}

Vector generalized_eigenvalues(const Matrix& a, const Matrix& c) {
  const Matrix l = cholesky_lower(c);
  // W = L^{-1} A L^{-T}
  const Matrix tmp = l.triangularView<Eigen::Lower>().solve(a);
  const Matrix w = l.triangularView<Eigen::Lower>().solve(tmp.transpose());
  Vector ev = sym_eigenvalues(w);
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

double frobenius(const Matrix& a) { return a.norm(); }

double relative_residual(const Matrix& lhs, const Matrix& rhs) {
  return (lhs - rhs).norm() / (1.0 + std::max(lhs.norm(), rhs.norm()));
}

int svec_size(int n) { return n * (n + 1) / 2; }

Matrix svec_to_matrix(const Vector& x, int n) {
  Matrix out(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j, ++k) {
      out(i, j) = x(k);
      out(j, i) = x(k);
    }
  }
  return out;
}

Vector matrix_to_svec(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  Vector x(svec_size(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j, ++k) x(k) = 0.5 * (a(i, j) + a(j, i));
  }
  return x;
}

Vector svec_pairing(const Matrix& g) {
  const int n = static_cast<int>(g.rows());
  Vector out(svec_size(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j, ++k) out(k) = (i == j) ? g(i, i) : g(i, j) + g(j, i);
  }
  return out;
}

Matrix svec_bilinear(const Matrix& a, const Matrix& b) {
  // tr(A e_p e_q^T B e_r e_s^T) = A(s, p) * B(q, r)
  const int n = static_cast<int>(a.rows());
  const int p = svec_size(n);
  std::vector<std::pair<int, int>> idx;
  idx.reserve(p);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) idx.emplace_back(i, j);
  }
  Matrix h(p, p);
  for (int k = 0; k < p; ++k) {
    const auto [i, j] = idx[k];
    for (int l = k; l < p; ++l) {
      const auto [r, s] = idx[l];
      double v = a(s, i) * b(j, r);
      if (i != j) v += a(s, j) * b(i, r);
      if (r != s) {
        v += a(r, i) * b(j, s);
        if (i != j) v += a(r, j) * b(i, s);
      }
      h(k, l) = v;
      h(l, k) = v;
    }
  }
  return h;
}

}  // namespace keyrate
