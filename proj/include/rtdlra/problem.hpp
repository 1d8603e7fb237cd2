#pragma once

// Grids, coefficient fields, physical boundaries and the benchmark builders.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rtdlra/low_rank.hpp"

namespace rtdlra {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Axis { x, y };
enum class Side { left = 0, right = 1, bottom = 2, top = 3 };

const char* to_string(Side side);
Side opposite(Side side);
Axis axis_of(Side side);

struct SpatialGrid {
  int nx = 0;
  int ny = 0;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  double dx() const { return (x_max - x_min) / nx; }
  double dy() const { return (y_max - y_min) / ny; }
  double x_center(int i) const { return x_min + (i + 0.5) * dx(); }
  double y_center(int j) const { return y_min + (j + 0.5) * dy(); }
  Eigen::Index n_cells() const { return static_cast<Eigen::Index>(nx) * ny; }
  // x runs fastest
  Eigen::Index index(int i, int j) const { return i + static_cast<Eigen::Index>(nx) * j; }

  void validate() const;
};

/// Midpoint rule on [0, 2pi). Masks are stored as 0/1 vectors so they can be
/// used directly as diagonal weights.
struct AngularGrid {
  int n_phi = 0;
  double dphi = 0.0;
  Vector phi;
  Vector vx;
  Vector vy;
  Vector x_positive;  // phi <= pi/2 or phi >= 3pi/2
  Vector x_negative;  // pi/2 < phi < 3pi/2
  Vector y_positive;  // 0 <= phi <= pi
  Vector y_negative;  // pi < phi < 2pi

  const Vector& velocity(Axis axis) const { return axis == Axis::x ? vx : vy; }
  /// Angles that flow into the subdomain through `side`.
  const Vector& incoming(Side side) const;
  const Vector& outgoing(Side side) const;
};

AngularGrid make_angular_grid(int n_phi);

struct MaterialField {
  Vector c_s;
  Vector c_t;
  Vector q;
  double c_adv = 1.0;

  void validate() const;
};

struct ZeroInflow {};
struct ConstantInflow {
  double value = 0.0;
};
/// amplitude / (sqrt(2 pi) sigma) * exp(-(s - center)^2 / (2 sigma^2)), with s
/// the coordinate along the side.
struct GaussianInflow {
  double center = 0.5;
  double sigma = 0.01;
  double amplitude = 1.0;
};

using BoundaryCondition = std::variant<ZeroInflow, ConstantInflow, GaussianInflow>;

struct PhysicalBoundarySpec {
  std::array<BoundaryCondition, 4> sides{};

  BoundaryCondition& operator[](Side side) { return sides[static_cast<int>(side)]; }
  const BoundaryCondition& operator[](Side side) const {
    return sides[static_cast<int>(side)];
  }
  /// Inflow value on the incoming half-range at coordinate `s` along `side`.
  double inflow(Side side, double s) const;
  bool is_zero(Side side) const;
  void validate() const;
};

enum class BlockKind { absorber, scatterer, source, vacuum };

const char* to_string(BlockKind kind);
BlockKind block_kind_from_string(const std::string& name);

struct BlockCoefficients {
  double c_s = 0.0;
  double c_t = 0.0;
  double q = 0.0;
};

struct MaterialTable {
  BlockCoefficients absorber;
  BlockCoefficients scatterer;
  BlockCoefficients source;
  BlockCoefficients vacuum;

  const BlockCoefficients& operator[](BlockKind kind) const;
};

MaterialTable lattice_materials();
MaterialTable hohlraum_materials();

/// Coarse block geometry; (i, j) are zero-based from the bottom-left block.
struct BlockLayout {
  int blocks_x = 0;
  int blocks_y = 0;
  std::vector<BlockKind> kinds;

  BlockLayout() = default;
  BlockLayout(int bx, int by, BlockKind fill);

  BlockKind at(int i, int j) const { return kinds.at(i + blocks_x * j); }
  void set(int i, int j, BlockKind kind);
};

BlockLayout default_lattice_layout();
BlockLayout default_hohlraum_layout();

struct Problem {
  std::string name;
  SpatialGrid grid;
  AngularGrid angles;
  MaterialField material;
  PhysicalBoundarySpec boundary;
  double f0 = 1e-9;
  double cfl = 0.5;

  double time_step() const;
};

Problem build_from_layout(std::string name, int nx, int ny, int n_phi,
                          const BlockLayout& layout, const MaterialTable& table,
                          const PhysicalBoundarySpec& boundary);

Problem build_lattice(int nx, int ny, int n_phi,
                      const std::optional<BlockLayout>& layout = std::nullopt);
Problem build_hohlraum(int nx, int ny, int n_phi,
                       const std::optional<BlockLayout>& layout = std::nullopt);
Problem build_point_source(int nx, int ny, int n_phi, double y0 = 0.85,
                           double sigma = 0.01,
                           const std::optional<BlockLayout>& layout = std::nullopt);

/// Global single-domain initial condition f = problem.f0.
LowRankState initial_state(const Problem& problem, Eigen::Index rank);

}  // namespace rtdlra
