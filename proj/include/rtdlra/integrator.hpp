#pragma once

// Projector-splitting substeps on one rectangular patch of cells.

#include <string>
#include <vector>

#include "rtdlra/low_rank.hpp"
#include "rtdlra/problem.hpp"

namespace rtdlra {

/// Eigenvalues at or below this magnitude are treated as zero velocity.
inline constexpr double kZeroVelocity = 1e-14;

struct FluxMatrix {
  Matrix c;       // V^T diag(v) V
  Matrix p;       // orthogonal eigenvectors of c
  Vector lambda;  // ascending
};

/// Throws std::logic_error if V is not orthonormal to 1e-8.
FluxMatrix flux_matrix(const Matrix& v, const Vector& velocities);

/// First-order one-sided differences along one axis of an nx x ny patch
/// (cell index i + nx * j). Ghost rows are indexed along the face: by j for
/// the x axis, by i for the y axis.
struct UpwindOperators {
  Axis axis = Axis::x;
  int nx = 0;
  int ny = 0;
  double h = 1.0;

  UpwindOperators() = default;
  UpwindOperators(Axis a, const SpatialGrid& grid);

  Eigen::Index n_cells() const { return static_cast<Eigen::Index>(nx) * ny; }
  Eigen::Index face_cells() const { return axis == Axis::x ? ny : nx; }

  /// (g_i - g_{i-1}) / h with g_{-1} taken from `low`.
  Matrix minus(const Matrix& g, const Matrix& low) const;
  /// (g_{i+1} - g_i) / h with g_n taken from `high`.
  Matrix plus(const Matrix& g, const Matrix& high) const;
  /// Same as above with zero ghosts.
  Matrix minus(const Matrix& g) const;
  Matrix plus(const Matrix& g) const;

  /// Rows of a cell-indexed matrix lying on the low or high face.
  Matrix low_face(const Matrix& g) const;
  Matrix high_face(const Matrix& g) const;
};

/// K at the low and high face, expressed in the current angular basis.
struct BoundaryValues {
  Axis axis = Axis::x;
  Matrix low;
  Matrix high;
};

/// -c_adv * [upwind derivative of K P, column by eigenvalue sign] Lambda P^T.
Matrix upwind_rhs(const Matrix& k, const FluxMatrix& flux, const UpwindOperators& ops,
                  const BoundaryValues& bv, double c_adv);

struct SubstepDiagnostics {
  double max_cfl = 0.0;
  std::vector<std::string> warnings;
};

/// Classical fourth-order Runge-Kutta step for an autonomous matrix ODE.
template <class Rhs>
Matrix rk4_step(const Matrix& y, double dt, Rhs&& rhs) {
  const Matrix k1 = rhs(y);
  const Matrix k2 = rhs(y + 0.5 * dt * k1);
  const Matrix k3 = rhs(y + 0.5 * dt * k2);
  const Matrix k4 = rhs(y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// K-step alone: RK4 solution of dK/dt = upwind_rhs(K) from K = U S.
Matrix advection_k_step(const LowRankState& state, const UpwindOperators& ops,
                        const Vector& velocities, const BoundaryValues& bv, double dt,
                        double c_adv);

/// K, S and L steps with QR after K and L. Boundary values are frozen and must
/// be given in the basis state.v. Cell densities of the result equal those of
/// the K step.
LowRankState advection_substep(const LowRankState& state, const UpwindOperators& ops,
                               const Vector& velocities, const BoundaryValues& bv,
                               double dt, double c_adv,
                               SubstepDiagnostics* diagnostics = nullptr);

/// Scattering, absorption and source on a patch; material vectors are local.
/// Adds the isotropic direction to V first if it is missing.
LowRankState collision_substep(const LowRankState& state, const MaterialField& material,
                               double dphi, double dt);

/// rho = U S (V^T 1) dphi
Vector density(const LowRankState& state, double dphi);

}  // namespace rtdlra
