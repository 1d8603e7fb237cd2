#include "rtdlra/integrator.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace rtdlra {

namespace {

void require_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

std::vector<Eigen::Index> columns_where(const Vector& lambda, int sign) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (sign > 0 ? lambda[i] > kZeroVelocity : lambda[i] < -kZeroVelocity) out.push_back(i);
  }
  return out;
}

Vector signed_part(const Vector& v, int sign) {
  Vector out = Vector::Zero(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (sign > 0 ? v[i] > kZeroVelocity : v[i] < -kZeroVelocity) out[i] = v[i];
  }
  return out;
}

constexpr double kSpanTolerance = 1e-12;

// Upwind derivative of the columns of g in eigen-coordinates, scaled by lambda.
Matrix directional_derivative(const Matrix& g, const Matrix& low, const Matrix& high,
                              const Vector& lambda, const UpwindOperators& ops) {
  Matrix out = Matrix::Zero(g.rows(), g.cols());
  const auto pos = columns_where(lambda, +1);
  const auto neg = columns_where(lambda, -1);
  if (!pos.empty()) {
    const Matrix d = ops.minus(g(Eigen::all, pos), low(Eigen::all, pos));
    for (std::size_t c = 0; c < pos.size(); ++c) {
      out.col(pos[c]) = lambda[pos[c]] * d.col(static_cast<Eigen::Index>(c));
    }
  }
  if (!neg.empty()) {
    const Matrix d = ops.plus(g(Eigen::all, neg), high(Eigen::all, neg));
    for (std::size_t c = 0; c < neg.size(); ++c) {
      out.col(neg[c]) = lambda[neg[c]] * d.col(static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

// Undoes one RK4 step of y' = b y + g (g constant), applied column by column:
// y1 = R(hb) y0 + h phi(hb) g with phi(z) = (R(z) - 1) / z.
Matrix rk4_affine_inverse(const Matrix& b, const Matrix& g, const Matrix& y1, double h) {
  const Eigen::Index n = b.rows();
  const Matrix z = h * b;
  const Matrix z2 = z * z;
  const Matrix z3 = z2 * z;
  const Matrix id = Matrix::Identity(n, n);
  const Matrix phi = id + z / 2.0 + z2 / 6.0 + z3 / 24.0;
  const Matrix r = id + z * phi;
  return r.partialPivLu().solve(y1 - h * phi * g);
}

// Normalized part of `x` outside span(q), or an empty vector if that part is
// negligible.
Vector orthogonal_remainder(const Matrix& q, const Vector& x) {
  Vector rest = x - q * (q.transpose() * x);
  rest -= q * (q.transpose() * rest);
  const double n = rest.norm();
  if (!(n > kSpanTolerance * x.norm())) return {};
  return rest / n;
}

}  // namespace

FluxMatrix flux_matrix(const Matrix& v, const Vector& velocities) {
  require_shape(v.rows() == velocities.size(), "flux_matrix: V and velocity sizes differ");
  if (orthonormality_defect(v) > 1e-8) {
    throw std::logic_error("flux_matrix: V is not orthonormal");
  }
  FluxMatrix out;
  out.c = v.transpose() * velocities.asDiagonal() * v;
  out.c = 0.5 * (out.c + out.c.transpose()).eval();
  SymmetricEigen eig = symmetric_eigen(out.c);
  out.p = std::move(eig.vectors);
  out.lambda = std::move(eig.values);
  return out;
}

UpwindOperators::UpwindOperators(Axis a, const SpatialGrid& grid)
    : axis(a), nx(grid.nx), ny(grid.ny), h(a == Axis::x ? grid.dx() : grid.dy()) {}

Matrix UpwindOperators::minus(const Matrix& g, const Matrix& low) const {
  require_shape(g.rows() == n_cells(), "upwind: field has wrong number of cells");
  require_shape(low.rows() == face_cells() && low.cols() == g.cols(),
                "upwind: ghost values have wrong shape");
  Matrix out(g.rows(), g.cols());
  const double inv = 1.0 / h;
  if (axis == Axis::x) {
    for (int j = 0; j < ny; ++j) {
      const Eigen::Index base = static_cast<Eigen::Index>(j) * nx;
      out.row(base) = inv * (g.row(base) - low.row(j));
      out.middleRows(base + 1, nx - 1) =
          inv * (g.middleRows(base + 1, nx - 1) - g.middleRows(base, nx - 1));
    }
  } else {
    const Eigen::Index rest = n_cells() - nx;
    out.topRows(nx) = inv * (g.topRows(nx) - low);
    out.bottomRows(rest) = inv * (g.bottomRows(rest) - g.topRows(rest));
  }
  return out;
}

Matrix UpwindOperators::plus(const Matrix& g, const Matrix& high) const {
  require_shape(g.rows() == n_cells(), "upwind: field has wrong number of cells");
  require_shape(high.rows() == face_cells() && high.cols() == g.cols(),
                "upwind: ghost values have wrong shape");
  Matrix out(g.rows(), g.cols());
  const double inv = 1.0 / h;
  if (axis == Axis::x) {
    for (int j = 0; j < ny; ++j) {
      const Eigen::Index base = static_cast<Eigen::Index>(j) * nx;
      out.middleRows(base, nx - 1) =
          inv * (g.middleRows(base + 1, nx - 1) - g.middleRows(base, nx - 1));
      out.row(base + nx - 1) = inv * (high.row(j) - g.row(base + nx - 1));
    }
  } else {
    const Eigen::Index rest = n_cells() - nx;
    out.topRows(rest) = inv * (g.bottomRows(rest) - g.topRows(rest));
    out.bottomRows(nx) = inv * (high - g.bottomRows(nx));
  }
  return out;
}

Matrix UpwindOperators::minus(const Matrix& g) const {
  return minus(g, Matrix::Zero(face_cells(), g.cols()));
}

Matrix UpwindOperators::plus(const Matrix& g) const {
  return plus(g, Matrix::Zero(face_cells(), g.cols()));
}

Matrix UpwindOperators::low_face(const Matrix& g) const {
  require_shape(g.rows() == n_cells(), "low_face: field has wrong number of cells");
  if (axis == Axis::y) return g.topRows(nx);
  Matrix out(ny, g.cols());
  for (int j = 0; j < ny; ++j) out.row(j) = g.row(static_cast<Eigen::Index>(j) * nx);
  return out;
}

Matrix UpwindOperators::high_face(const Matrix& g) const {
  require_shape(g.rows() == n_cells(), "high_face: field has wrong number of cells");
  if (axis == Axis::y) return g.bottomRows(nx);
  Matrix out(ny, g.cols());
  for (int j = 0; j < ny; ++j) {
    out.row(j) = g.row(static_cast<Eigen::Index>(j) * nx + nx - 1);
  }
  return out;
}

Matrix upwind_rhs(const Matrix& k, const FluxMatrix& flux, const UpwindOperators& ops,
                  const BoundaryValues& bv, double c_adv) {
  const Eigen::Index r = flux.p.rows();
  if (k.cols() != r || bv.low.cols() != r || bv.high.cols() != r) {
    throw std::invalid_argument("upwind_rhs: rank mismatch between K, flux and boundary values");
  }
  if (bv.axis != ops.axis) throw std::invalid_argument("upwind_rhs: axis mismatch");
  const Matrix w = directional_derivative(k * flux.p, bv.low * flux.p, bv.high * flux.p,
                                          flux.lambda, ops);
  return -c_adv * w * flux.p.transpose();
}

Matrix advection_k_step(const LowRankState& state, const UpwindOperators& ops,
                        const Vector& velocities, const BoundaryValues& bv, double dt,
                        double c_adv) {
  const FluxMatrix flux = flux_matrix(state.v, velocities);
  const Matrix low = bv.low * flux.p;
  const Matrix high = bv.high * flux.p;
  const Matrix kt = rk4_step(state.u * state.s * flux.p, dt, [&](const Matrix& y) {
    return Matrix(-c_adv * directional_derivative(y, low, high, flux.lambda, ops));
  });
  return kt * flux.p.transpose();
}

LowRankState advection_substep(const LowRankState& state, const UpwindOperators& ops,
                               const Vector& velocities, const BoundaryValues& bv,
                               double dt, double c_adv, SubstepDiagnostics* diagnostics) {
  const Eigen::Index r = state.rank();
  if (bv.low.cols() != r || bv.high.cols() != r) {
    throw std::invalid_argument("advection_substep: boundary values do not match the rank");
  }
  if (bv.axis != ops.axis) throw std::invalid_argument("advection_substep: axis mismatch");
  const FluxMatrix flux = flux_matrix(state.v, velocities);
  const Matrix low = bv.low * flux.p;
  const Matrix high = bv.high * flux.p;

  if (diagnostics != nullptr && r > 0) {
    const double cfl = flux.lambda.cwiseAbs().maxCoeff() * c_adv * dt / ops.h;
    diagnostics->max_cfl = std::max(diagnostics->max_cfl, cfl);
    if (cfl > 1.0) {
      std::ostringstream msg;
      msg << "CFL number " << cfl << " exceeds 1";
      diagnostics->warnings.push_back(msg.str());
    }
  }

  // K step in eigen-coordinates
  const Matrix kt = rk4_step(state.u * state.s * flux.p, dt, [&](const Matrix& y) {
    return Matrix(-c_adv * directional_derivative(y, low, high, flux.lambda, ops));
  });
  const QrResult qk = qr_factor(kt * flux.p.transpose());
  const Matrix& u1 = qk.q;

  // Galerkin blocks of the one-sided differences in the new spatial basis
  const Matrix a_minus = u1.transpose() * ops.minus(u1);
  const Matrix a_plus = u1.transpose() * ops.plus(u1);
  const double inv = 1.0 / ops.h;
  const Matrix u1_low = ops.low_face(u1);
  const Matrix u1_high = ops.high_face(u1);

  // S step backwards in time, taken as the exact inverse of a forward RK4 step
  // of T' = -c [(A- T + G-) L+ + (A+ T + G+) L-] in eigen-coordinates T = S P
  const Matrix g_minus = -inv * u1_low.transpose() * low;
  const Matrix g_plus = inv * u1_high.transpose() * high;
  Matrix t2 = qk.r * flux.p;
  for (Eigen::Index j = 0; j < r; ++j) {
    const double lam = flux.lambda[j];
    if (std::abs(lam) <= kZeroVelocity) continue;
    const bool pos = lam > 0.0;
    const double scale = -c_adv * lam;
    t2.col(j) = rk4_affine_inverse(scale * (pos ? a_minus : a_plus),
                                   scale * (pos ? g_minus : g_plus).col(j), t2.col(j), dt);
  }
  const Matrix s2 = t2 * flux.p.transpose();

  // L step, upwinded angle by angle
  const Matrix h_minus = -inv * u1_low.transpose() * bv.low;
  const Matrix h_plus = inv * u1_high.transpose() * bv.high;
  const Vector v_pos = signed_part(velocities, +1);
  const Vector v_neg = signed_part(velocities, -1);
  const Matrix src_pos = state.v * h_minus.transpose();
  const Matrix src_neg = state.v * h_plus.transpose();
  Matrix l1 = rk4_step(state.v * s2.transpose(), dt, [&](const Matrix& l) {
    return Matrix(-c_adv * (v_pos.asDiagonal() * (l * a_minus.transpose() + src_pos) +
                            v_neg.asDiagonal() * (l * a_plus.transpose() + src_neg)));
  });
  // Replace the cell densities by those of the K step, which is in flux form.
  // The correction is isotropic and lies in span(U1), so the rank is kept.
  const Vector ones = Vector::Ones(state.n_phi());
  const Vector moments = state.v.transpose() * ones;
  const Vector deficit = qk.r * moments - l1.transpose() * ones;
  l1 += ones * deficit.transpose() / static_cast<double>(state.n_phi());
  QrResult ql = qr_factor(l1);

  LowRankState out;
  out.u = u1;
  out.s = ql.r.transpose();
  out.v = std::move(ql.q);
  return out;
}

LowRankState collision_substep(const LowRankState& state, const MaterialField& material,
                               double dphi, double dt) {
  const Eigen::Index nc = state.n_cells();
  if (material.c_s.size() != nc || material.c_t.size() != nc || material.q.size() != nc) {
    throw std::invalid_argument("collision_substep: material size does not match the state");
  }
  const double w = dphi / (2.0 * std::numbers::pi);
  // scattering only conserves mass if the isotropic direction is in span(V)
  const Eigen::Index r0 = state.rank();
  if (r0 < std::min(nc, state.n_phi())) {
    const Vector iso = orthogonal_remainder(state.v, Vector::Ones(state.n_phi()));
    if (iso.size() > 0) {
      Vector extra = orthogonal_remainder(state.u, Vector::Ones(nc));
      for (Eigen::Index i = 0; extra.size() == 0 && i < nc; ++i) {
        extra = orthogonal_remainder(state.u, Vector::Unit(nc, i));
      }
      LowRankState wider;
      wider.u.resize(nc, r0 + 1);
      wider.u << state.u, extra;
      wider.v.resize(state.n_phi(), r0 + 1);
      wider.v << state.v, iso;
      wider.s = Matrix::Zero(r0 + 1, r0 + 1);
      wider.s.topLeftCorner(r0, r0) = state.s;
      return collision_substep(wider, material, dphi, dt);
    }
  }
  const Vector a = state.v.transpose() * Vector::Ones(state.n_phi());
  const Vector& cs = material.c_s;
  const Vector& ct = material.c_t;
  const Vector& q = material.q;

  // K step
  const Matrix k1 = rk4_step(state.u * state.s, dt, [&](const Matrix& k) {
    Matrix out = (w * cs.cwiseProduct(k * a)) * a.transpose();
    out -= ct.asDiagonal() * k;
    out += q * a.transpose();
    return out;
  });
  const QrResult qk = qr_factor(k1);
  const Matrix& u1 = qk.q;

  const Matrix ms = u1.transpose() * cs.asDiagonal() * u1;
  const Matrix mt = u1.transpose() * ct.asDiagonal() * u1;
  const Vector uq = u1.transpose() * q;

  // S step backwards as the inverse of a forward RK4 step of
  // S' = w Ms S a a^T - Mt S + (U^T q) a^T. Rotating the columns so that a is
  // the first axis decouples the first column from the others.
  const double a_norm = a.norm();
  Matrix rot = Matrix::Identity(a.size(), a.size());
  if (a_norm > 0.0) {
    const Eigen::HouseholderQR<Matrix> hq(Matrix(a / a_norm));
    rot = hq.householderQ() * Matrix::Identity(a.size(), a.size());
    if (rot.col(0).dot(a) < 0.0) rot.col(0) *= -1.0;
  }
  Matrix y = qk.r * rot;
  const Eigen::Index r = y.cols();
  if (r > 1) {
    y.rightCols(r - 1) = rk4_affine_inverse(-mt, Matrix::Zero(r, r - 1), y.rightCols(r - 1), dt);
  }
  if (r > 0) {
    y.col(0) = rk4_affine_inverse(w * a_norm * a_norm * ms - mt, a_norm * uq, y.col(0), dt);
  }
  const Matrix s2 = y * rot.transpose();

  // L step
  const Vector ones = Vector::Ones(state.n_phi());
  const Matrix l1 = rk4_step(state.v * s2.transpose(), dt, [&](const Matrix& l) {
    const Eigen::RowVectorXd mass = ones.transpose() * l;
    return Matrix(w * ones * (mass * ms) - l * mt + ones * uq.transpose());
  });
  QrResult ql = qr_factor(l1);

  LowRankState out;
  out.u = u1;
  out.s = ql.r.transpose();
  out.v = std::move(ql.q);
  return out;
}

Vector density(const LowRankState& state, double dphi) {
  const Vector moments = state.v.transpose() * Vector::Ones(state.n_phi());
  return state.u * (state.s * moments) * dphi;
}

}  // namespace rtdlra
