#include "rtdlra/tensor_core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rtdlra {

QrResult qr_factor(const Matrix& m) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  if (rows < cols) {
    throw std::invalid_argument("qr_factor: expected rows >= cols, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  QrResult out;
  if (cols == 0) {
    out.q = Matrix(rows, 0);
    out.r = Matrix(0, 0);
    return out;
  }

  Eigen::HouseholderQR<Matrix> qr(m);
  out.q = qr.householderQ() * Matrix::Identity(rows, cols);
  out.r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();

  for (Eigen::Index j = 0; j < cols; ++j) {
    if (out.r(j, j) < 0.0) {
      out.r.row(j) *= -1.0;
      out.q.col(j) *= -1.0;
    }
  }
  return out;
}

SvdResult svd(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw std::invalid_argument("svd: empty matrix");
  }
  Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SvdResult out{solver.matrixU(), solver.singularValues(), solver.matrixV()};

  for (Eigen::Index j = 0; j < out.left.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < out.left.rows(); ++i) {
      const double a = std::abs(out.left(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (out.left(arg, j) < 0.0) {
      out.left.col(j) *= -1.0;
      out.right.col(j) *= -1.0;
    }
  }
  return out;
}

std::size_t truncation_rank(std::span<const double> sigma, double tol,
                            std::size_t floor) {
  if (!(tol >= 0.0)) {
    throw std::invalid_argument("truncation_rank: tolerance must be nonnegative");
  }
  if (floor > sigma.size()) {
    throw std::invalid_argument("truncation_rank: floor " + std::to_string(floor) +
                                " exceeds number of singular values " +
                                std::to_string(sigma.size()));
  }
  for (std::size_t j = 0; j + 1 < sigma.size(); ++j) {
    if (sigma[j] < sigma[j + 1] || sigma[j + 1] < 0.0) {
      throw std::invalid_argument(
          "truncation_rank: singular values must be nonnegative and descending");
    }
  }

  // tail2 holds sum_{j >= r} sigma_j^2 while r walks down from the end
  std::size_t r = sigma.size();
  double tail2 = 0.0;
  while (r > floor) {
    const double next = tail2 + sigma[r - 1] * sigma[r - 1];
    if (std::sqrt(next) > tol) break;
    tail2 = next;
    --r;
  }
  return r;
}

std::size_t truncation_rank(const Vector& singular_values, double tol,
                            std::size_t floor) {
  return truncation_rank(
      std::span<const double>(singular_values.data(),
                              static_cast<std::size_t>(singular_values.size())),
      tol, floor);
}

SymmetricEigen symmetric_eigen(const Matrix& c) {
  if (c.rows() != c.cols()) {
    throw std::invalid_argument("symmetric_eigen: matrix is not square");
  }
  if (c.rows() == 0) return {Matrix(0, 0), Vector(0)};
  Eigen::SelfAdjointEigenSolver<Matrix> solver(c);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_eigen: eigensolver did not converge");
  }
  return {solver.eigenvectors(), solver.eigenvalues()};
}

double orthonormality_defect(const Matrix& m) {
  if (m.cols() == 0) return 0.0;
  const Matrix gram = m.transpose() * m;
  return (gram - Matrix::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace rtdlra
