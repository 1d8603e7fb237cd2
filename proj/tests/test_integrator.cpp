#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rtdlra/integrator.hpp"

using namespace rtdlra;

namespace {

SpatialGrid grid(int nx, int ny) {
  SpatialGrid g;
  g.nx = nx;
  g.ny = ny;
  return g;
}

LowRankState random_state(Eigen::Index nc, Eigen::Index m, Eigen::Index r,
                          std::mt19937_64& gen) {
  return {oracle::random_orthonormal(nc, r, gen), oracle::random_matrix(r, r, gen),
          oracle::random_orthonormal(m, r, gen)};
}

// Bases whose first column is the normalized ones vector.
}  // namespace

TEST(FluxMatrix, MeanOfCosineVanishes) {
  const AngularGrid a = make_angular_grid(16);
  const Matrix v = Vector::Constant(16, 0.25);
  const FluxMatrix f = flux_matrix(v, a.vx);
  // direct summation: sum_k cos(phi_k) / n
  double direct = 0.0;
  for (int k = 0; k < 16; ++k) direct += std::cos(oracle::phi(k, 16)) / 16.0;
  EXPECT_NEAR(f.c(0, 0), direct, 1e-15);
  EXPECT_NEAR(f.c(0, 0), 0.0, 1e-15);
}

TEST(FluxMatrix, AngleBasisGivesVelocities) {
  const AngularGrid a = make_angular_grid(8);
  const FluxMatrix f = flux_matrix(Matrix::Identity(8, 8), a.vy);
  Vector sorted = a.vy;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_LE((f.lambda - sorted).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FluxMatrix, RandomBasisEigenpairs) {
  std::mt19937_64 gen(11);
  const AngularGrid a = make_angular_grid(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix v = oracle::random_orthonormal(8, 1 + trial % 8, gen);
    const FluxMatrix f = flux_matrix(v, a.vx);
    EXPECT_LE((f.c - f.c.transpose()).norm(), 1e-12);
    EXPECT_LE((f.p * f.lambda.asDiagonal() * f.p.transpose() - f.c).norm(),
              1e-10 * std::max(f.c.norm(), 1e-300));
    EXPECT_GE(f.lambda.minCoeff(), a.vx.minCoeff() - 1e-12);
    EXPECT_LE(f.lambda.maxCoeff(), a.vx.maxCoeff() + 1e-12);
  }
}

TEST(FluxMatrix, RejectsNonOrthonormalBasis) {
  const AngularGrid a = make_angular_grid(8);
  EXPECT_THROW(flux_matrix(2.0 * Matrix::Identity(8, 2), a.vx), std::logic_error);
}

TEST(UpwindOperators, ConstantFieldWithMatchingGhostsHasZeroDerivative) {
  for (Axis axis : {Axis::x, Axis::y}) {
    const UpwindOperators ops(axis, grid(5, 4));
    const Matrix g = Matrix::Constant(20, 3, 2.5);
    const Matrix ghost = Matrix::Constant(ops.face_cells(), 3, 2.5);
    EXPECT_EQ(ops.minus(g, ghost).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(ops.plus(g, ghost).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(UpwindRhs, ConstantStateIsFixed) {
  std::mt19937_64 gen(12);
  const AngularGrid a = make_angular_grid(8);
  const SpatialGrid g = grid(6, 6);
  for (Axis axis : {Axis::x, Axis::y}) {
    const UpwindOperators ops(axis, g);
    const Matrix v = oracle::random_orthonormal(8, 3, gen);
    const Eigen::RowVectorXd row = oracle::random_matrix(1, 3, gen);
    const Matrix k = Matrix::Ones(36, 1) * row;
    BoundaryValues bv{axis, Matrix::Ones(6, 1) * row, Matrix::Ones(6, 1) * row};
    const Matrix rhs = upwind_rhs(k, flux_matrix(v, a.velocity(axis)), ops, bv, 1.0);
    EXPECT_LE(rhs.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(UpwindRhs, AngleBasisReducesToPerAngleUpwinding) {
  std::mt19937_64 gen(13);
  const AngularGrid a = make_angular_grid(8);
  const SpatialGrid g = grid(8, 8);
  for (Axis axis : {Axis::x, Axis::y}) {
    const UpwindOperators ops(axis, g);
    const Matrix f = oracle::random_matrix(64, 8, gen);
    const Matrix low = oracle::random_matrix(8, 8, gen);
    const Matrix high = oracle::random_matrix(8, 8, gen);
    const Matrix rhs = upwind_rhs(f, flux_matrix(Matrix::Identity(8, 8), a.velocity(axis)), ops,
                                  {axis, low, high}, 1.3);
    const Matrix ref = oracle::upwind_rhs(f, 8, 8, g.dx(), axis == Axis::x, a.velocity(axis),
                                          low, high, 1.3);
    EXPECT_LE((rhs - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(UpwindRhs, LinearDataHasConstantDerivative) {
  // single angle direction with velocity lambda > 0
  const SpatialGrid g = grid(10, 3);
  const UpwindOperators ops(Axis::x, g);
  Vector vel(2);
  vel << 0.7, 0.7;
  const Matrix v = Matrix::Identity(2, 1);
  Matrix k(30, 1);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 10; ++i) k(g.index(i, j), 0) = 2.0 * g.x_center(i);
  const Matrix low = Matrix::Constant(3, 1, 2.0 * (g.x_center(0) - g.dx()));
  const Matrix rhs = upwind_rhs(k, flux_matrix(v, vel), ops, {Axis::x, low, low}, 1.5);
  EXPECT_LE((rhs.array() + 1.5 * 0.7 * 2.0).abs().maxCoeff(), 1e-12);
}

TEST(UpwindRhs, RankMismatchIsRejected) {
  const AngularGrid a = make_angular_grid(8);
  const UpwindOperators ops(Axis::x, grid(4, 4));
  const FluxMatrix f = flux_matrix(Matrix::Identity(8, 2), a.vx);
  EXPECT_THROW(upwind_rhs(Matrix::Zero(16, 2), f, ops,
                          {Axis::x, Matrix::Zero(4, 3), Matrix::Zero(4, 2)}, 1.0),
               std::invalid_argument);
}

TEST(AdvectionSubstep, ZeroStaysZero) {
  std::mt19937_64 gen(14);
  const AngularGrid a = make_angular_grid(8);
  const UpwindOperators ops(Axis::x, grid(6, 6));
  LowRankState s = random_state(36, 8, 3, gen);
  s.s.setZero();
  const BoundaryValues bv{Axis::x, Matrix::Zero(6, 3), Matrix::Zero(6, 3)};
  const LowRankState out = advection_substep(s, ops, a.vx, bv, 0.05, 1.0);
  EXPECT_EQ(out.reconstruct().cwiseAbs().maxCoeff(), 0.0);
}

TEST(AdvectionSubstep, ConstantIsPreserved) {
  std::mt19937_64 gen(15);
  const AngularGrid a = make_angular_grid(8);
  for (Axis axis : {Axis::x, Axis::y}) {
    const UpwindOperators ops(axis, grid(6, 5));
    LowRankState s = constant_state(30, 8, 0.7, 3);
    const Matrix k = s.k();
    const BoundaryValues bv{axis, ops.low_face(k), ops.high_face(k)};
    SubstepDiagnostics diag;
    const LowRankState out = advection_substep(s, ops, a.velocity(axis), bv, 0.5 / 6, 1.0, &diag);
    EXPECT_LE((out.reconstruct().array() - 0.7).abs().maxCoeff(), 1e-12);
    EXPECT_LE(orthonormality_defect(out.u), 1e-10);
    EXPECT_LE(orthonormality_defect(out.v), 1e-10);
    EXPECT_TRUE(diag.warnings.empty());
  }
}

TEST(AdvectionSubstep, CflViolationIsReported) {
  const AngularGrid a = make_angular_grid(8);
  const UpwindOperators ops(Axis::x, grid(6, 6));
  const LowRankState s = constant_state(36, 8, 1.0, 2);
  const BoundaryValues bv{Axis::x, ops.low_face(s.k()), ops.high_face(s.k())};
  SubstepDiagnostics diag;
  advection_substep(s, ops, a.vx, bv, 0.5, 1.0, &diag);
  EXPECT_GT(diag.max_cfl, 1.0);
  EXPECT_FALSE(diag.warnings.empty());
}

TEST(AdvectionSubstep, KStepAtFullRankIsPerAngleUpwinding) {
  std::mt19937_64 gen(16);
  const AngularGrid a = make_angular_grid(8);
  const SpatialGrid g = grid(16, 16);
  for (Axis axis : {Axis::x, Axis::y}) {
    const UpwindOperators ops(axis, g);
    const LowRankState s = random_state(256, 8, 8, gen);
    const Matrix low = oracle::random_matrix(16, 8, gen);
    const Matrix high = oracle::random_matrix(16, 8, gen);
    const double dt = 0.5 * g.dx();
    const Matrix k1 = advection_k_step(s, ops, a.velocity(axis), {axis, low * s.v, high * s.v}, dt, 1.0);
    const Matrix ref = oracle::rk4(s.reconstruct(), dt, [&](const Matrix& f) {
      return oracle::upwind_rhs(f, 16, 16, g.dx(), axis == Axis::x, a.velocity(axis), low, high);
    });
    EXPECT_LE((k1 * s.v.transpose() - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AdvectionSubstep, FullSubstepAtFullRankIsPerAngleUpwinding) {
  std::mt19937_64 gen(33);
  const AngularGrid a = make_angular_grid(8);
  const SpatialGrid g = grid(16, 16);
  for (Axis axis : {Axis::x, Axis::y}) {
    const UpwindOperators ops(axis, g);
    LowRankState s = random_state(256, 8, 8, gen);
    Matrix f = s.reconstruct();
    const Matrix low = oracle::random_matrix(16, 8, gen);
    const Matrix high = oracle::random_matrix(16, 8, gen);
    const double dt = 0.5 * g.dx();
    for (int n = 0; n < 5; ++n) {
      s = advection_substep(s, ops, a.velocity(axis), {axis, low * s.v, high * s.v}, dt, 1.0);
      f = oracle::rk4(f, dt, [&](const Matrix& y) {
        return oracle::upwind_rhs(y, 16, 16, g.dx(), axis == Axis::x, a.velocity(axis), low, high);
      });
      EXPECT_LE((s.reconstruct() - f).cwiseAbs().maxCoeff(), 1e-12 * f.cwiseAbs().maxCoeff());
    }
  }
}

TEST(AdvectionSubstep, ReducedRankDensityFollowsKStep) {
  // compact data, so nothing reaches a face: the cell densities must match
  // the flux-form K step and the total mass must not change
  std::mt19937_64 gen(34);
  const AngularGrid a = make_angular_grid(16);
  const SpatialGrid g = grid(40, 40);
  Matrix bumps(1600, 3);
  for (int j = 0; j < 40; ++j)
    for (int i = 0; i < 40; ++i) {
      const double x = g.x_center(i) - 0.5, y = g.y_center(j) - 0.5;
      const double e = std::exp(-(x * x + y * y) / 0.004);
      bumps.row(g.index(i, j)) << e, x * e, y * e;
    }
  for (Axis axis : {Axis::x, Axis::y}) {
    const UpwindOperators ops(axis, g);
    const LowRankState s{qr_factor(bumps).q, oracle::random_matrix(3, 3, gen),
                         oracle::random_orthonormal(16, 3, gen)};
    const BoundaryValues bv{axis, Matrix::Zero(40, 3), Matrix::Zero(40, 3)};
    const double dt = 0.5 * g.dx();
    const LowRankState out = advection_substep(s, ops, a.velocity(axis), bv, dt, 1.0);
    const Vector rho_k =
        advection_k_step(s, ops, a.velocity(axis), bv, dt, 1.0) * (s.v.transpose() * Vector::Ones(16)) * a.dphi;
    const Vector rho = density(out, a.dphi);
    EXPECT_EQ(out.rank(), 3);
    EXPECT_LE((rho - rho_k).cwiseAbs().maxCoeff(), 1e-13 * rho_k.cwiseAbs().maxCoeff());
    EXPECT_LE(std::abs(rho.sum() - density(s, a.dphi).sum()), 1e-13 * rho.cwiseAbs().sum());
  }
}

TEST(CollisionSubstep, ZeroCoefficientsLeaveStateUnchanged) {
  std::mt19937_64 gen(17);
  const LowRankState s = random_state(36, 8, 3, gen);
  MaterialField m{Vector::Zero(36), Vector::Zero(36), Vector::Zero(36), 1.0};
  const LowRankState out = collision_substep(s, m, 2 * std::numbers::pi / 8, 0.1);
  EXPECT_LE((out.reconstruct() - s.reconstruct()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(CollisionSubstep, PureAbsorberDecaysExponentially) {
  const double c = 3.0;
  for (double dt : {0.01, 0.05, 0.1}) {
    const LowRankState s = constant_state(36, 8, 1.0, 1);
    MaterialField m{Vector::Zero(36), Vector::Constant(36, c), Vector::Zero(36), 1.0};
    const double dphi = 2 * std::numbers::pi / 8;
    const LowRankState out = collision_substep(s, m, dphi, dt);
    const double factor = density(out, dphi)[7] / density(s, dphi)[7];
    const double z = c * dt;
    // the S step undoes one L step, leaving the RK4 stability polynomial R(-z)
    EXPECT_LE(std::abs(factor - std::exp(-z)), std::pow(z, 5) / 120) << dt;
    auto rk = [](double x) { return 1 + x + x * x / 2 + x * x * x / 6 + x * x * x * x / 24; };
    EXPECT_NEAR(factor, rk(-z), 1e-14);
  }
}

TEST(CollisionSubstep, ConstantSourceFromZero) {
  const double dt = 0.03, q = 0.8;
  LowRankState s = constant_state(36, 8, 0.0, 2);
  MaterialField m{Vector::Zero(36), Vector::Zero(36), Vector::Constant(36, q), 1.0};
  const double dphi = 2 * std::numbers::pi / 8;
  const LowRankState out = collision_substep(s, m, dphi, dt);
  EXPECT_LE((density(out, dphi).array() - 2 * std::numbers::pi * q * dt).abs().maxCoeff(), 1e-12);
}

TEST(CollisionSubstep, PureScatteringConservesMass) {
  std::mt19937_64 gen(18);
  const Eigen::Index nc = 64, m = 16, r = 5;
  LowRankState s = random_state(nc, m, r, gen);
  Vector cs(nc);
  for (Eigen::Index i = 0; i < nc; ++i) cs[i] = 0.5 + (i % 7);
  MaterialField mat{cs, cs, Vector::Zero(nc), 1.0};
  const double dphi = 2 * std::numbers::pi / m;
  double mass0 = density(s, dphi).sum();
  for (int step = 0; step < 10; ++step) {
    s = collision_substep(s, mat, dphi, 0.02);
    const double mass = density(s, dphi).sum();
    EXPECT_LE(std::abs(mass - mass0), 1e-10 * std::abs(mass0));
    EXPECT_LE(orthonormality_defect(s.u), 1e-10);
    EXPECT_LE(orthonormality_defect(s.v), 1e-10);
    mass0 = mass;
  }
}

TEST(Density, Examples) {
  const double dphi = 2 * std::numbers::pi / 12;
  const LowRankState c = constant_state(20, 12, 0.3, 2);
  EXPECT_LE((density(c, dphi).array() - 2 * std::numbers::pi * 0.3).abs().maxCoeff(), 1e-14);

  // rank one, V supported on the right-going half-range
  const AngularGrid a = make_angular_grid(12);
  std::mt19937_64 gen(19);
  LowRankState h{oracle::random_orthonormal(20, 1, gen), Matrix::Constant(1, 1, 2.0),
                 a.x_positive / std::sqrt(a.x_positive.sum())};
  const Matrix f = h.reconstruct();
  Vector brute = Vector::Zero(20);
  for (int i = 0; i < 20; ++i)
    for (int k = 0; k < 12; ++k) brute[i] += f(i, k) * dphi;
  EXPECT_LE((density(h, dphi) - brute).cwiseAbs().maxCoeff(), 1e-14);

  LowRankState z = c;
  z.s.setZero();
  EXPECT_EQ(density(z, dphi).cwiseAbs().maxCoeff(), 0.0);
}
