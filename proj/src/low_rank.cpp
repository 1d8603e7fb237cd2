#include "rtdlra/low_rank.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rtdlra {

namespace {

// Orthonormal basis whose first column is ones / sqrt(n).
Matrix ones_basis(Eigen::Index n, Eigen::Index rank) {
  Matrix seed = Matrix::Zero(n, rank);
  seed.col(0).setOnes();
  for (Eigen::Index j = 1; j < rank; ++j) seed(j - 1, j) = 1.0;
  Matrix q = qr_factor(seed).q;
  q.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  return q;
}

}  // namespace

LowRankState constant_state(Eigen::Index n_cells, Eigen::Index n_phi, double value,
                            Eigen::Index rank) {
  if (n_cells < 1 || n_phi < 1) {
    throw std::invalid_argument("constant_state: empty grid");
  }
  if (rank < 1 || rank > std::min(n_cells, n_phi)) {
    throw std::invalid_argument("constant_state: rank " + std::to_string(rank) +
                                " outside [1, " +
                                std::to_string(std::min(n_cells, n_phi)) + "]");
  }
  LowRankState out;
  out.u = ones_basis(n_cells, rank);
  out.v = ones_basis(n_phi, rank);
  out.s = Matrix::Zero(rank, rank);
  out.s(0, 0) = value * std::sqrt(static_cast<double>(n_cells) * static_cast<double>(n_phi));
  return out;
}

void check_state(const LowRankState& state, double tol) {
  const Eigen::Index r = state.s.rows();
  if (state.s.cols() != r || state.u.cols() != r || state.v.cols() != r) {
    throw std::logic_error("low-rank state has inconsistent factor shapes");
  }
  if (!state.u.allFinite() || !state.s.allFinite() || !state.v.allFinite()) {
    throw std::logic_error("low-rank state contains non-finite values");
  }
  const double du = orthonormality_defect(state.u);
  const double dv = orthonormality_defect(state.v);
  if (du > tol || dv > tol) {
    throw std::logic_error("low-rank basis lost orthonormality (U defect " +
                           std::to_string(du) + ", V defect " + std::to_string(dv) + ")");
  }
}

}  // namespace rtdlra
