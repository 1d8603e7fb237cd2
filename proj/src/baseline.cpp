#include "rtdlra/baseline.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rtdlra {

ToleranceConfig classic_config(double tol, Eigen::Index min_rank, std::uint64_t seed) {
  ToleranceConfig c;
  c.tol = tol;
  c.min_rank = min_rank;
  c.seed = seed;
  c.self_augment = true;
  return c;
}

LowRankState classic_step(const LowRankState& state, const Problem& problem, double dt,
                          const ToleranceConfig& config, std::uint64_t step_index,
                          StepReport* report) {
  if (state.n_cells() != problem.grid.n_cells() || state.n_phi() != problem.angles.n_phi) {
    throw std::invalid_argument("classic_step: state does not match the problem grid");
  }
  DomainState domain;
  domain.topology = Topology::make(problem.grid, 1, 1);
  domain.step_index = step_index;
  SubdomainState sub;
  sub.id = 0;
  sub.lr = state;
  sub.material = problem.material;
  domain.subdomains.push_back(std::move(sub));
  StepReport r = dd_step(domain, problem, dt, config);
  if (report != nullptr) *report = std::move(r);
  return std::move(domain.subdomains.front().lr);
}

namespace {

void check_size(const Problem& problem) {
  const Eigen::Index entries = problem.grid.n_cells() * problem.angles.n_phi;
  if (entries > kFullTensorLimit) {
    throw std::length_error("full tensor with " + std::to_string(entries) +
                            " entries exceeds the limit of " +
                            std::to_string(kFullTensorLimit));
  }
}

// Ghost values for every angle on one face: inflow on the incoming half-range.
Matrix inflow_ghost(const Problem& problem, Side side) {
  const SpatialGrid& g = problem.grid;
  const bool along_y = axis_of(side) == Axis::x;
  const int n = along_y ? g.ny : g.nx;
  const Vector& in = problem.angles.incoming(side);
  Matrix ghost = Matrix::Zero(n, problem.angles.n_phi);
  if (problem.boundary.is_zero(side)) return ghost;
  for (int c = 0; c < n; ++c) {
    const double s = along_y ? g.y_center(c) : g.x_center(c);
    ghost.row(c) = problem.boundary.inflow(side, s) * in.transpose();
  }
  return ghost;
}

Matrix advect_full(const Matrix& f, const Problem& problem, Axis axis, double dt) {
  const UpwindOperators ops(axis, problem.grid);
  const Vector& v = problem.angles.velocity(axis);
  const double c = problem.material.c_adv;
  const Matrix low = inflow_ghost(problem, axis == Axis::x ? Side::left : Side::bottom);
  const Matrix high = inflow_ghost(problem, axis == Axis::x ? Side::right : Side::top);
  std::vector<Eigen::Index> pos;
  std::vector<Eigen::Index> neg;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (v[k] > kZeroVelocity) pos.push_back(k);
    if (v[k] < -kZeroVelocity) neg.push_back(k);
  }
  const Vector vp = v(pos);
  const Vector vn = v(neg);
  return rk4_step(f, dt, [&](const Matrix& y) {
    Matrix out = Matrix::Zero(y.rows(), y.cols());
    if (!pos.empty()) {
      out(Eigen::all, pos) = -c * ops.minus(y(Eigen::all, pos), low(Eigen::all, pos)) *
                             vp.asDiagonal();
    }
    if (!neg.empty()) {
      out(Eigen::all, neg) = -c * ops.plus(y(Eigen::all, neg), high(Eigen::all, neg)) *
                             vn.asDiagonal();
    }
    return out;
  });
}

}  // namespace

FullTensor full_tensor_initial(const Problem& problem) {
  check_size(problem);
  return {Matrix::Constant(problem.grid.n_cells(), problem.angles.n_phi, problem.f0)};
}

FullTensor full_tensor_step(const FullTensor& f, const Problem& problem, double dt) {
  check_size(problem);
  if (f.values.rows() != problem.grid.n_cells() || f.values.cols() != problem.angles.n_phi) {
    throw std::invalid_argument("full_tensor_step: tensor does not match the problem grid");
  }
  Matrix g = advect_full(f.values, problem, Axis::x, dt);
  g = advect_full(g, problem, Axis::y, dt);

  const MaterialField& m = problem.material;
  const double w = problem.angles.dphi / (2.0 * std::numbers::pi);
  const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(problem.angles.n_phi);
  g = rk4_step(g, dt, [&](const Matrix& y) {
    const Vector rho_w = w * y.rowwise().sum();
    Matrix out = m.c_s.cwiseProduct(rho_w) * ones;
    out -= m.c_t.asDiagonal() * y;
    out += m.q * ones;
    return out;
  });
  return {std::move(g)};
}

Vector full_tensor_density(const FullTensor& f, double dphi) {
  return f.values.rowwise().sum() * dphi;
}

double relative_error(const Matrix& f, const Matrix& reference, const SpatialGrid& grid,
                      double dphi) {
  if (f.rows() != reference.rows() || f.cols() != reference.cols()) {
    throw std::invalid_argument("relative_error: shapes differ");
  }
  const double cell = grid.dx() * grid.dy() * dphi;
  const double num = (f - reference).squaredNorm() * cell;
  const double den = static_cast<double>(f.size()) * cell;
  return std::sqrt(num / den);
}

}  // namespace rtdlra
