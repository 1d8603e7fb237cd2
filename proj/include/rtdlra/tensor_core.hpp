#pragma once

// Dense linear-algebra kernels shared by the solver modules.
//
// Everything here is a pure function of its arguments. Matrices are Eigen
// column-major doubles; the factorizations follow fixed sign conventions so
// that results are reproducible run to run.

#include <cstddef>
#include <span>

#include <Eigen/Dense>

namespace rtdlra {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct QrResult {
  Matrix q;  // m x n, orthonormal columns
  Matrix r;  // n x n, upper triangular with nonnegative diagonal
};

struct SvdResult {
  Matrix left;              // m x k, orthonormal columns
  Vector singular_values;   // k, descending
  Matrix right;             // n x k, orthonormal columns
};

struct SymmetricEigen {
  Matrix vectors;  // orthogonal, columns are eigenvectors
  Vector values;   // ascending
};

/// Thin Householder QR of a tall matrix (rows >= cols).
///
/// Columns of R are sign-normalized so that diag(R) >= 0. Rank-deficient input
/// is fine: Q still has orthonormal columns, R just has zero diagonal entries.
QrResult qr_factor(const Matrix& m);

/// Thin SVD, k = min(rows, cols).
///
/// Sign convention: the largest-magnitude entry of every left singular vector
/// is positive (ties resolved by the lowest row index).
SvdResult svd(const Matrix& m);

/// Smallest r' >= floor such that sqrt(sum_{j >= r'} sigma_j^2) <= tol.
/// Throws std::invalid_argument for unsorted input, negative tol or floor
/// larger than the number of values.
std::size_t truncation_rank(std::span<const double> singular_values, double tol,
                            std::size_t floor);
std::size_t truncation_rank(const Vector& singular_values, double tol,
                            std::size_t floor);

/// Eigendecomposition of a symmetric matrix (only the lower triangle is read).
SymmetricEigen symmetric_eigen(const Matrix& c);

/// max_ij |M^T M - I|
double orthonormality_defect(const Matrix& m);

bool all_finite(const Matrix& m);

}  // namespace rtdlra
