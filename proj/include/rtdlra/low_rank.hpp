#pragma once

#include "rtdlra/tensor_core.hpp"

namespace rtdlra {

// f ~= U S V^T with U (cells x r) and V (angles x r) Euclidean-orthonormal.
struct LowRankState {
  Matrix u;
  Matrix s;
  Matrix v;

  Eigen::Index rank() const { return s.rows(); }
  Eigen::Index n_cells() const { return u.rows(); }
  Eigen::Index n_phi() const { return v.rows(); }

  Matrix k() const { return u * s; }
  Matrix reconstruct() const { return u * s * v.transpose(); }
};

/// Rank-`rank` representation of a constant value, exact in its first
/// component and zero-padded beyond it.
LowRankState constant_state(Eigen::Index n_cells, Eigen::Index n_phi, double value,
                            Eigen::Index rank);

/// Throws std::logic_error if the shapes disagree or a factor lost
/// orthonormality beyond `tol`.
void check_state(const LowRankState& state, double tol = 1e-8);

}  // namespace rtdlra
