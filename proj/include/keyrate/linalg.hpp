#pragma once

// Small dense symmetric-matrix kernels shared by every module.

#include <Eigen/Dense>

#include <vector>

namespace keyrate {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tolerances used by the PSD/PD acceptance tests.
inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kPdFloor = 1e-10;

/// A real symmetric matrix of dimension >= 1.
///
/// Construction checks symmetry to relative tolerance 1e-12 and then stores
/// the exact symmetric part, so downstream kernels never see skew round-off.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& entries);

  static SymMatrix identity(int dim);
  static SymMatrix scaled_identity(int dim, double value);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  operator const Matrix&() const { return entries_; }
  double operator()(int r, int c) const { return entries_(r, c); }

 private:
  Matrix entries_;
};

Matrix symmetrize(const Matrix& a);

/// Ascending eigenvalues of a symmetric matrix.
Vector sym_eigenvalues(const Matrix& a);
double min_eigenvalue(const Matrix& a);
double max_eigenvalue(const Matrix& a);

/// min eig >= -1e-10 * (1 + max|eig|).
bool is_psd(const Matrix& a);
/// min eig > 1e-10.
bool is_pd(const Matrix& a);
/// max(0, -min eig): how far a matrix is from the PSD cone.
double psd_violation(const Matrix& a);

/// log|A| through a Cholesky factor. Throws NotPositiveDefinite if A is not SPD.
double log_det(const Matrix& a);
/// Same as log_det but returns false instead of throwing.
bool try_log_det(const Matrix& a, double& out);

/// Inverse of an SPD matrix via Cholesky. Throws NotPositiveDefinite.
Matrix spd_inverse(const Matrix& a);
/// Principal square root of a PSD matrix; negative round-off eigenvalues clamp to 0.
Matrix sqrtm_psd(const Matrix& a);
/// Inverse principal square root of an SPD matrix.
Matrix inv_sqrtm_spd(const Matrix& a);

/// Lower Cholesky factor. Throws NotPositiveDefinite.
Matrix cholesky_lower(const Matrix& a);

/// Generalized eigenvalues of the symmetric-definite pencil (A, C), C SPD,
/// sorted descending. Computed by Cholesky-whitening C then a symmetric solve.
Vector generalized_eigenvalues(const Matrix& a, const Matrix& c);

double frobenius(const Matrix& a);

/// Frobenius distance between two matrices scaled by 1 + max operand norm.
double relative_residual(const Matrix& lhs, const Matrix& rhs);

// Coordinates on symmetric n x n matrices used by the Newton solvers:
//   X = sum_k x_k E_k,  E_ii = e_i e_i^T,  E_ij = e_i e_j^T + e_j e_i^T (i < j).
// Ordering is row-major over the upper triangle.
int svec_size(int n);
Matrix svec_to_matrix(const Vector& x, int n);
Vector matrix_to_svec(const Matrix& a);
/// <G, E_k> for every basis element.
Vector svec_pairing(const Matrix& g);
/// H_kl = tr(A E_k B E_l) for symmetric A and B.
Matrix svec_bilinear(const Matrix& a, const Matrix& b);

}  // namespace keyrate
