#include "rtdlra/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rtdlra {

const char* to_string(Side side) {
  switch (side) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::bottom: return "bottom";
    case Side::top: return "top";
  }
  return "?";
}

Side opposite(Side side) {
  switch (side) {
    case Side::left: return Side::right;
    case Side::right: return Side::left;
    case Side::bottom: return Side::top;
    case Side::top: return Side::bottom;
  }
  return side;
}

Axis axis_of(Side side) {
  return (side == Side::left || side == Side::right) ? Axis::x : Axis::y;
}

void SpatialGrid::validate() const {
  if (nx < 1 || ny < 1) throw ConfigError("grid needs at least one cell per axis");
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw ConfigError("grid extent must be positive");
  }
}

AngularGrid make_angular_grid(int n_phi) {
  if (n_phi < 1) throw ConfigError("n_phi must be positive");
  AngularGrid g;
  g.n_phi = n_phi;
  g.dphi = 2.0 * std::numbers::pi / n_phi;
  g.phi.resize(n_phi);
  g.vx.resize(n_phi);
  g.vy.resize(n_phi);
  g.x_positive.setZero(n_phi);
  g.x_negative.setZero(n_phi);
  g.y_positive.setZero(n_phi);
  g.y_negative.setZero(n_phi);
  const long n = n_phi;
  for (long k = 0; k < n; ++k) {
    g.phi[k] = (k + 0.5) * g.dphi;
    g.vx[k] = std::cos(g.phi[k]);
    g.vy[k] = std::sin(g.phi[k]);
    // phi_k = (2k+1) pi / n, so the half-range tests reduce to integer ones
    const long a = 4 * k + 2;
    const bool xp = a <= n || a >= 3 * n;
    const bool yp = 2 * k + 1 <= n;
    g.x_positive[k] = xp ? 1.0 : 0.0;
    g.x_negative[k] = xp ? 0.0 : 1.0;
    g.y_positive[k] = yp ? 1.0 : 0.0;
    g.y_negative[k] = yp ? 0.0 : 1.0;
    if (a == n || a == 3 * n) g.vx[k] = 0.0;
    if (2 * k + 1 == n) g.vy[k] = 0.0;
  }
  return g;
}

const Vector& AngularGrid::incoming(Side side) const {
  switch (side) {
    case Side::left: return x_positive;
    case Side::right: return x_negative;
    case Side::bottom: return y_positive;
    case Side::top: return y_negative;
  }
  return x_positive;
}

const Vector& AngularGrid::outgoing(Side side) const { return incoming(opposite(side)); }

void MaterialField::validate() const {
  if (c_s.size() != c_t.size() || c_s.size() != q.size()) {
    throw ConfigError("material fields have different sizes");
  }
  if (!(c_adv > 0.0)) throw ConfigError("advection speed must be positive");
  for (Eigen::Index i = 0; i < c_s.size(); ++i) {
    if (!(c_s[i] >= 0.0) || !(c_t[i] >= c_s[i])) {
      throw ConfigError("material coefficients must satisfy c_t >= c_s >= 0");
    }
  }
}

double PhysicalBoundarySpec::inflow(Side side, double s) const {
  const BoundaryCondition& bc = (*this)[side];
  if (const auto* c = std::get_if<ConstantInflow>(&bc)) return c->value;
  if (const auto* g = std::get_if<GaussianInflow>(&bc)) {
    const double d = s - g->center;
    return g->amplitude / (std::sqrt(2.0 * std::numbers::pi) * g->sigma) *
           std::exp(-d * d / (2.0 * g->sigma * g->sigma));
  }
  return 0.0;
}

bool PhysicalBoundarySpec::is_zero(Side side) const {
  const BoundaryCondition& bc = (*this)[side];
  if (std::holds_alternative<ZeroInflow>(bc)) return true;
  if (const auto* c = std::get_if<ConstantInflow>(&bc)) return c->value == 0.0;
  return std::get<GaussianInflow>(bc).amplitude == 0.0;
}

void PhysicalBoundarySpec::validate() const {
  for (const auto& bc : sides) {
    if (const auto* g = std::get_if<GaussianInflow>(&bc)) {
      if (!(g->sigma > 0.0)) throw ConfigError("gaussian inflow needs sigma > 0");
      if (!(g->amplitude >= 0.0)) throw ConfigError("gaussian inflow needs amplitude >= 0");
    }
  }
}

const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::absorber: return "absorber";
    case BlockKind::scatterer: return "scatterer";
    case BlockKind::source: return "source";
    case BlockKind::vacuum: return "vacuum";
  }
  return "?";
}

BlockKind block_kind_from_string(const std::string& name) {
  if (name == "absorber") return BlockKind::absorber;
  if (name == "scatterer") return BlockKind::scatterer;
  if (name == "source") return BlockKind::source;
  if (name == "vacuum") return BlockKind::vacuum;
  throw ConfigError("unknown block kind '" + name + "'");
}

const BlockCoefficients& MaterialTable::operator[](BlockKind kind) const {
  switch (kind) {
    case BlockKind::absorber: return absorber;
    case BlockKind::scatterer: return scatterer;
    case BlockKind::source: return source;
    case BlockKind::vacuum: return vacuum;
  }
  return vacuum;
}

MaterialTable lattice_materials() {
  return {{0.0, 10.0, 0.0}, {1.0, 1.0, 0.0}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};
}

MaterialTable hohlraum_materials() {
  return {{0.0, 100.0, 0.0}, {1.0, 1.0, 0.0}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};
}

BlockLayout::BlockLayout(int bx, int by, BlockKind fill)
    : blocks_x(bx), blocks_y(by) {
  if (bx < 1 || by < 1) throw ConfigError("block layout needs at least one block");
  kinds.assign(static_cast<std::size_t>(bx) * by, fill);
}

void BlockLayout::set(int i, int j, BlockKind kind) {
  if (i < 0 || i >= blocks_x || j < 0 || j >= blocks_y) {
    throw ConfigError("block (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) +
                      ") lies outside the " + std::to_string(blocks_x) + "x" +
                      std::to_string(blocks_y) + " layout");
  }
  kinds[i + blocks_x * j] = kind;
}

BlockLayout default_lattice_layout() {
  BlockLayout layout(7, 7, BlockKind::scatterer);
  const int absorbers[][2] = {{2, 2}, {4, 2}, {6, 2}, {3, 3}, {5, 3}, {2, 4},
                              {6, 4}, {3, 5}, {5, 5}, {2, 6}, {6, 6}};
  for (const auto& b : absorbers) layout.set(b[0] - 1, b[1] - 1, BlockKind::absorber);
  layout.set(3, 3, BlockKind::source);
  return layout;
}

BlockLayout default_hohlraum_layout() {
  // the left column stays open so inflow through the left side reaches the interior
  BlockLayout layout(5, 5, BlockKind::vacuum);
  for (int i = 1; i < 5; ++i) {
    layout.set(i, 0, BlockKind::absorber);
    layout.set(i, 4, BlockKind::absorber);
  }
  for (int j = 0; j < 5; ++j) layout.set(4, j, BlockKind::absorber);
  layout.set(2, 2, BlockKind::absorber);
  return layout;
}

double Problem::time_step() const { return cfl * std::min(grid.dx(), grid.dy()); }

Problem build_from_layout(std::string name, int nx, int ny, int n_phi,
                          const BlockLayout& layout, const MaterialTable& table,
                          const PhysicalBoundarySpec& boundary) {
  if (layout.blocks_x < 1 || layout.blocks_y < 1 ||
      layout.kinds.size() != static_cast<std::size_t>(layout.blocks_x) * layout.blocks_y) {
    throw ConfigError("malformed block layout");
  }
  if (nx < 1 || ny < 1 || nx % layout.blocks_x != 0 || ny % layout.blocks_y != 0) {
    throw ConfigError("grid " + std::to_string(nx) + "x" + std::to_string(ny) +
                      " is not aligned with the " + std::to_string(layout.blocks_x) + "x" +
                      std::to_string(layout.blocks_y) + " block layout");
  }
  Problem p;
  p.name = std::move(name);
  p.grid.nx = nx;
  p.grid.ny = ny;
  p.grid.validate();
  p.angles = make_angular_grid(n_phi);
  p.boundary = boundary;
  p.boundary.validate();

  const Eigen::Index nc = p.grid.n_cells();
  p.material.c_s.resize(nc);
  p.material.c_t.resize(nc);
  p.material.q.resize(nc);
  const int cx = nx / layout.blocks_x;
  const int cy = ny / layout.blocks_y;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const BlockCoefficients& c = table[layout.at(i / cx, j / cy)];
      const Eigen::Index idx = p.grid.index(i, j);
      p.material.c_s[idx] = c.c_s;
      p.material.c_t[idx] = c.c_t;
      p.material.q[idx] = c.q;
    }
  }
  p.material.validate();
  return p;
}

Problem build_lattice(int nx, int ny, int n_phi, const std::optional<BlockLayout>& layout) {
  return build_from_layout("lattice", nx, ny, n_phi, layout.value_or(default_lattice_layout()),
                           lattice_materials(), PhysicalBoundarySpec{});
}

Problem build_hohlraum(int nx, int ny, int n_phi, const std::optional<BlockLayout>& layout) {
  PhysicalBoundarySpec bc;
  bc[Side::left] = ConstantInflow{1.0};
  return build_from_layout("hohlraum", nx, ny, n_phi,
                           layout.value_or(default_hohlraum_layout()), hohlraum_materials(),
                           bc);
}

Problem build_point_source(int nx, int ny, int n_phi, double y0, double sigma,
                           const std::optional<BlockLayout>& layout) {
  if (!(sigma > 0.0)) throw ConfigError("point source needs sigma > 0");
  PhysicalBoundarySpec bc;
  bc[Side::left] = GaussianInflow{y0, sigma, 1.0};
  return build_from_layout("point_source", nx, ny, n_phi,
                           layout.value_or(default_hohlraum_layout()), hohlraum_materials(),
                           bc);
}

LowRankState initial_state(const Problem& problem, Eigen::Index rank) {
  return constant_state(problem.grid.n_cells(), problem.angles.n_phi, problem.f0, rank);
}

}  // namespace rtdlra
