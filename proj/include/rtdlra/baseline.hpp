#pragma once

// Single-domain low-rank solver and the dense reference solver.

#include "rtdlra/decomposition.hpp"

namespace rtdlra {

/// Settings for the single-domain solver, with self augmentation enabled.
ToleranceConfig classic_config(double tol, Eigen::Index min_rank = 1, std::uint64_t seed = 0);

/// One step of the single-domain solver; the same pipeline as dd_step on a
/// 1x1 topology.
LowRankState classic_step(const LowRankState& state, const Problem& problem, double dt,
                          const ToleranceConfig& config, std::uint64_t step_index = 0,
                          StepReport* report = nullptr);

/// Dense (cells x n_phi) distribution.
struct FullTensor {
  Matrix values;
};

inline constexpr Eigen::Index kFullTensorLimit = 100'000'000;

FullTensor full_tensor_initial(const Problem& problem);

/// Per-angle upwind x advection, then y advection, then collision, each with
/// one RK4 step. Throws std::length_error above kFullTensorLimit entries.
FullTensor full_tensor_step(const FullTensor& f, const Problem& problem, double dt);

Vector full_tensor_density(const FullTensor& f, double dphi);

/// sqrt(sum (f - g)^2 dx dy dphi) / sqrt(sum dx dy dphi)
double relative_error(const Matrix& f, const Matrix& reference, const SpatialGrid& grid,
                      double dphi);

}  // namespace rtdlra
