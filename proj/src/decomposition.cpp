#include "rtdlra/decomposition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rtdlra {

namespace {

Axis side_axis(Side side) { return axis_of(side); }

Side low_side(Axis axis) { return axis == Axis::x ? Side::left : Side::bottom; }
Side high_side(Axis axis) { return axis == Axis::x ? Side::right : Side::top; }

// --- wire helpers (little endian) ---

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <class T>
T take(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("packet truncated");
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::uint64_t mix_seed(std::uint64_t seed, int id, std::uint64_t step, int axis) {
  // splitmix64 finalizer
  std::uint64_t z = seed ^ (static_cast<std::uint64_t>(id) * 0x9E3779B97F4A7C15ull) ^
                    (step * 0xBF58476D1CE4E5B9ull) ^ static_cast<std::uint64_t>(axis + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Matrix random_columns(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(gen);
  }
  return m;
}

MaterialField restrict_material(const MaterialField& global, const SubdomainInfo& info) {
  MaterialField out;
  const auto n = static_cast<Eigen::Index>(info.global_cells.size());
  out.c_s.resize(n);
  out.c_t.resize(n);
  out.q.resize(n);
  out.c_adv = global.c_adv;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index g = info.global_cells[static_cast<std::size_t>(i)];
    out.c_s[i] = global.c_s[g];
    out.c_t[i] = global.c_t[g];
    out.q[i] = global.q[g];
  }
  return out;
}

// Angular directions the local advection operator creates from the state.
Matrix advection_directions(const LowRankState& state, const UpwindOperators& ops,
                            const Vector& velocities, double scale) {
  const Matrix k = state.u * state.s;
  const Matrix d = 0.5 * (ops.minus(k, ops.low_face(k)) + ops.plus(k, ops.high_face(k)));
  const Matrix r = qr_factor(d).r;
  return scale * velocities.asDiagonal() * state.v * r.transpose();
}

}  // namespace

// --- topology ---

Topology Topology::make(const SpatialGrid& grid, int blocks_x, int blocks_y) {
  grid.validate();
  if (blocks_x < 1 || blocks_y < 1) throw ConfigError("block counts must be positive");
  if (grid.nx % blocks_x != 0 || grid.ny % blocks_y != 0) {
    throw ConfigError("nx = " + std::to_string(grid.nx) + " is not divisible by blocks_x = " +
                      std::to_string(blocks_x) + " or ny = " + std::to_string(grid.ny) +
                      " by blocks_y = " + std::to_string(blocks_y));
  }
  Topology t;
  t.blocks_x = blocks_x;
  t.blocks_y = blocks_y;
  const int cx = grid.nx / blocks_x;
  const int cy = grid.ny / blocks_y;
  for (int bj = 0; bj < blocks_y; ++bj) {
    for (int bi = 0; bi < blocks_x; ++bi) {
      SubdomainInfo s;
      s.id = bi + blocks_x * bj;
      s.block_i = bi;
      s.block_j = bj;
      s.i0 = bi * cx;
      s.j0 = bj * cy;
      s.grid.nx = cx;
      s.grid.ny = cy;
      s.grid.x_min = grid.x_min + s.i0 * grid.dx();
      s.grid.x_max = grid.x_min + (s.i0 + cx) * grid.dx();
      s.grid.y_min = grid.y_min + s.j0 * grid.dy();
      s.grid.y_max = grid.y_min + (s.j0 + cy) * grid.dy();
      if (bi > 0) s.neighbor[static_cast<int>(Side::left)] = s.id - 1;
      if (bi + 1 < blocks_x) s.neighbor[static_cast<int>(Side::right)] = s.id + 1;
      if (bj > 0) s.neighbor[static_cast<int>(Side::bottom)] = s.id - blocks_x;
      if (bj + 1 < blocks_y) s.neighbor[static_cast<int>(Side::top)] = s.id + blocks_x;
      s.global_cells.reserve(static_cast<std::size_t>(cx) * cy);
      for (int j = 0; j < cy; ++j) {
        for (int i = 0; i < cx; ++i) s.global_cells.push_back(grid.index(s.i0 + i, s.j0 + j));
      }
      t.subdomains.push_back(std::move(s));
    }
  }
  return t;
}

int Topology::locate(const SpatialGrid& grid, double x, double y) const {
  const int i = std::clamp(static_cast<int>(std::floor((x - grid.x_min) / grid.dx())), 0,
                           grid.nx - 1);
  const int j = std::clamp(static_cast<int>(std::floor((y - grid.y_min) / grid.dy())), 0,
                           grid.ny - 1);
  const int bi = i / (grid.nx / blocks_x);
  const int bj = j / (grid.ny / blocks_y);
  return bi + blocks_x * bj;
}

// --- packets ---

std::vector<std::uint8_t> encode_packet(const BoundaryPacket& packet) {
  const Eigen::Index r = packet.k_slice.cols();
  if (packet.v.cols() != r) throw std::invalid_argument("encode_packet: rank mismatch");
  if (r > 0xFFFF) throw std::invalid_argument("encode_packet: rank does not fit in 16 bits");
  std::vector<std::uint8_t> out;
  out.reserve(15 + 8 * static_cast<std::size_t>(r * (packet.k_slice.rows() + packet.v.rows())));
  put<std::uint32_t>(out, packet.sender);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(packet.side));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(r));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(packet.k_slice.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(packet.v.rows()));
  for (Eigen::Index i = 0; i < packet.k_slice.rows(); ++i) {
    for (Eigen::Index j = 0; j < r; ++j) put<double>(out, packet.k_slice(i, j));
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < packet.v.rows(); ++i) put<double>(out, packet.v(i, j));
  }
  return out;
}

BoundaryPacket decode_packet(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  BoundaryPacket p;
  p.sender = take<std::uint32_t>(bytes, pos);
  const auto side = take<std::uint8_t>(bytes, pos);
  if (side > 3) throw std::runtime_error("packet has invalid side " + std::to_string(side));
  p.side = static_cast<Side>(side);
  const Eigen::Index r = take<std::uint16_t>(bytes, pos);
  const Eigen::Index cells = take<std::uint32_t>(bytes, pos);
  const Eigen::Index n_phi = take<std::uint32_t>(bytes, pos);
  const std::size_t expected = pos + 8 * static_cast<std::size_t>(r * (cells + n_phi));
  if (bytes.size() != expected) {
    throw std::runtime_error("packet payload has " + std::to_string(bytes.size()) +
                             " bytes, expected " + std::to_string(expected));
  }
  p.k_slice.resize(cells, r);
  p.v.resize(n_phi, r);
  for (Eigen::Index i = 0; i < cells; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) p.k_slice(i, j) = take<double>(bytes, pos);
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < n_phi; ++i) p.v(i, j) = take<double>(bytes, pos);
  }
  return p;
}

BoundaryPacket extract_boundary_packet(const SubdomainState& state, const SubdomainInfo& info,
                                       Side side) {
  const UpwindOperators ops(side_axis(side), info.grid);
  const Matrix k = state.lr.u * state.lr.s;
  BoundaryPacket p;
  p.sender = static_cast<std::uint32_t>(info.id);
  p.side = side;
  const bool low = side == Side::left || side == Side::bottom;
  p.k_slice = low ? ops.low_face(k) : ops.high_face(k);
  p.v = state.lr.v;
  return p;
}

BoundaryPacket physical_packet(const Problem& problem, const SubdomainInfo& info, Side side) {
  const AngularGrid& angles = problem.angles;
  const Vector& in = angles.incoming(side);
  const double m_in = in.sum();
  const UpwindOperators ops(side_axis(side), info.grid);
  BoundaryPacket p;
  p.sender = kPhysicalSender;
  // the data arrives as if sent from the far face of a virtual neighbor
  p.side = opposite(side);
  p.k_slice = Matrix::Zero(ops.face_cells(), 1);
  if (m_in == 0.0) {
    p.v = Matrix::Zero(angles.n_phi, 1);
    p.v(0, 0) = 1.0;
    return p;
  }
  p.v = in / std::sqrt(m_in);
  if (problem.boundary.is_zero(side)) return p;
  for (Eigen::Index c = 0; c < ops.face_cells(); ++c) {
    const double s = side_axis(side) == Axis::x ? info.grid.y_center(static_cast<int>(c))
                                                : info.grid.x_center(static_cast<int>(c));
    p.k_slice(c, 0) = problem.boundary.inflow(side, s) * std::sqrt(m_in);
  }
  return p;
}

BoundaryValues project_boundary(const LowRankState& own, const SubdomainInfo& info,
                                const BoundaryPacket& low, const BoundaryPacket& high,
                                Axis axis, const AngularGrid& angles) {
  const UpwindOperators ops(axis, info.grid);
  const Side lo = low_side(axis);
  const Side hi = high_side(axis);
  if (side_axis(low.side) != axis || side_axis(high.side) != axis) {
    throw std::invalid_argument("project_boundary: packet side does not match the axis");
  }
  if (low.k_slice.rows() != ops.face_cells() || high.k_slice.rows() != ops.face_cells() ||
      low.v.rows() != own.n_phi() || high.v.rows() != own.n_phi()) {
    throw std::invalid_argument("project_boundary: packet shape does not match the subdomain");
  }
  const Matrix& v = own.v;
  const Matrix k = own.u * own.s;
  BoundaryValues bv;
  bv.axis = axis;
  bv.low = low.k_slice * (low.v.transpose() * angles.incoming(lo).asDiagonal() * v) +
           ops.low_face(k) * (v.transpose() * angles.outgoing(lo).asDiagonal() * v);
  bv.high = high.k_slice * (high.v.transpose() * angles.incoming(hi).asDiagonal() * v) +
            ops.high_face(k) * (v.transpose() * angles.outgoing(hi).asDiagonal() * v);
  return bv;
}

// --- rank adaptation ---

void ToleranceConfig::validate() const {
  if (!(tol >= 0.0)) throw ConfigError("tolerance must be nonnegative");
  if (min_rank < 1) throw ConfigError("min_rank must be at least 1");
  if (!(noise_floor >= 0.0)) throw ConfigError("noise floor must be nonnegative");
}

Matrix packet_directions(const BoundaryPacket& packet) {
  if (packet.k_slice.size() == 0) return Matrix(packet.v.rows(), 0);
  const SvdResult d = svd(packet.k_slice);
  return packet.v * d.right * d.singular_values.asDiagonal();
}

AugmentResult augment_with(const LowRankState& state, const Matrix& candidates, double tol,
                           double noise_floor, std::uint64_t seed) {
  AugmentResult out;
  out.state = state;
  const Eigen::Index r = state.rank();
  const Eigen::Index cap = std::min(state.n_cells(), state.n_phi());
  if (candidates.cols() == 0 || r >= cap) {
    out.clamped = candidates.cols() > 0 && r >= cap;
    return out;
  }
  const double scale = candidates.norm();
  if (scale == 0.0) return out;

  Matrix perp = candidates - state.v * (state.v.transpose() * candidates);
  perp -= state.v * (state.v.transpose() * perp);
  const SvdResult d = svd(perp);
  const Vector& tau = d.singular_values;
  Eigen::Index p = static_cast<Eigen::Index>(truncation_rank(tau, tol, 0));
  while (p > 0 && tau[p - 1] <= noise_floor * scale) --p;
  if (r + p > cap) {
    p = cap - r;
    out.clamped = true;
  }
  if (p == 0) return out;

  Matrix v_hat(state.n_phi(), r + p);
  v_hat << state.v, d.left.leftCols(p);
  Matrix u_hat(state.n_cells(), r + p);
  u_hat << state.u, random_columns(state.n_cells(), p, seed);
  const QrResult qv = qr_factor(v_hat);
  const QrResult qu = qr_factor(u_hat);
  Matrix s_hat = Matrix::Zero(r + p, r + p);
  s_hat.topLeftCorner(r, r) = state.s;

  out.state.u = qu.q;
  out.state.v = qv.q;
  out.state.s = qu.r * s_hat * qv.r.transpose();
  out.added = p;
  return out;
}

AugmentResult augment(const LowRankState& state, const BoundaryPacket& low,
                      const BoundaryPacket& high, double tol, std::uint64_t seed,
                      double noise_floor) {
  const Matrix a = packet_directions(low);
  const Matrix b = packet_directions(high);
  Matrix candidates(state.n_phi(), a.cols() + b.cols());
  candidates << a, b;
  return augment_with(state, candidates, tol, noise_floor, seed);
}

LowRankState truncate(const LowRankState& state, double tol, Eigen::Index min_rank) {
  const Eigen::Index r = state.rank();
  if (r == 0) return state;
  const SvdResult d = svd(state.s);
  const auto floor = static_cast<std::size_t>(std::clamp<Eigen::Index>(min_rank, 0, r));
  const auto keep = static_cast<Eigen::Index>(truncation_rank(d.singular_values, tol, floor));
  LowRankState out;
  out.u = state.u * d.left.leftCols(keep);
  out.v = state.v * d.right.leftCols(keep);
  out.s = d.singular_values.head(keep).asDiagonal();
  return out;
}

// --- time stepping ---

DomainState make_domain_state(const Problem& problem, int blocks_x, int blocks_y,
                              Eigen::Index initial_rank) {
  DomainState d;
  d.topology = Topology::make(problem.grid, blocks_x, blocks_y);
  for (const SubdomainInfo& info : d.topology.subdomains) {
    SubdomainState s;
    s.id = info.id;
    s.lr = constant_state(info.grid.n_cells(), problem.angles.n_phi, problem.f0, initial_rank);
    s.material = restrict_material(problem.material, info);
    s.rank_intermediate = initial_rank;
    d.subdomains.push_back(std::move(s));
  }
  return d;
}

namespace {

// Exchange packets through the wire format, as a distributed backend would.
BoundaryPacket transmit(const BoundaryPacket& packet) {
  const std::vector<std::uint8_t> bytes = encode_packet(packet);
  return decode_packet(bytes);
}

void advect_axis(DomainState& domain, const Problem& problem, double dt,
                 const ToleranceConfig& config, Axis axis, const PacketObserver& observer,
                 StepReport& report) {
  const Side lo = low_side(axis);
  const Side hi = high_side(axis);
  const auto n = domain.subdomains.size();

  // every packet is taken from the states as they were before this substep
  std::vector<BoundaryPacket> low(n);
  std::vector<BoundaryPacket> high(n);
  for (std::size_t s = 0; s < n; ++s) {
    const SubdomainInfo& info = domain.topology.subdomains[s];
    const int nl = info.neighbor_at(lo);
    const int nh = info.neighbor_at(hi);
    low[s] = nl == kPhysicalBoundary
                 ? physical_packet(problem, info, lo)
                 : transmit(extract_boundary_packet(domain.subdomains[nl],
                                                    domain.topology.subdomains[nl], hi));
    high[s] = nh == kPhysicalBoundary
                  ? physical_packet(problem, info, hi)
                  : transmit(extract_boundary_packet(domain.subdomains[nh],
                                                     domain.topology.subdomains[nh], lo));
    if (observer) {
      observer(info.id, low[s]);
      observer(info.id, high[s]);
    }
  }

  const Vector& velocities = problem.angles.velocity(axis);
  const double c_adv = problem.material.c_adv;
  for (std::size_t s = 0; s < n; ++s) {
    const SubdomainInfo& info = domain.topology.subdomains[s];
    SubdomainState& sub = domain.subdomains[s];
    const UpwindOperators ops(axis, info.grid);

    const Matrix a = packet_directions(low[s]);
    const Matrix b = packet_directions(high[s]);
    Matrix own = Matrix(problem.angles.n_phi, 0);
    if (config.self_augment) own = advection_directions(sub.lr, ops, velocities, dt * c_adv);
    Matrix candidates(problem.angles.n_phi, a.cols() + b.cols() + own.cols());
    candidates << a, b, own;
    const std::uint64_t seed =
        mix_seed(config.seed, info.id, domain.step_index, static_cast<int>(axis));
    AugmentResult aug =
        augment_with(sub.lr, candidates, config.tol, config.noise_floor, seed);
    if (aug.clamped) {
      report.warnings.push_back("subdomain " + std::to_string(info.id) +
                                ": augmented rank clamped to " +
                                std::to_string(aug.state.rank()));
    }
    sub.rank_intermediate = std::max(sub.rank_intermediate, aug.state.rank());

    const BoundaryValues bv =
        project_boundary(aug.state, info, low[s], high[s], axis, problem.angles);
    SubstepDiagnostics diag;
    LowRankState advanced = advection_substep(aug.state, ops, velocities, bv, dt, c_adv, &diag);
    report.max_cfl = std::max(report.max_cfl, diag.max_cfl);
    for (auto& w : diag.warnings) {
      if (report.warnings.size() < 16) {
        report.warnings.push_back("subdomain " + std::to_string(info.id) + ": " + w);
      }
    }
    sub.rank_intermediate = std::max(sub.rank_intermediate, advanced.rank());
    sub.lr = truncate(advanced, config.tol, config.min_rank);
  }
}

}  // namespace

StepReport dd_step(DomainState& domain, const Problem& problem, double dt,
                   const ToleranceConfig& config, const PacketObserver& observer) {
  config.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dd_step: time step must be positive");
  StepReport report;
  for (SubdomainState& sub : domain.subdomains) sub.rank_intermediate = sub.lr.rank();

  advect_axis(domain, problem, dt, config, Axis::x, observer, report);
  advect_axis(domain, problem, dt, config, Axis::y, observer, report);
  for (SubdomainState& sub : domain.subdomains) {
    sub.lr = collision_substep(sub.lr, sub.material, problem.angles.dphi, dt);
    sub.rank_intermediate = std::max(sub.rank_intermediate, sub.lr.rank());
  }
  ++domain.step_index;

  for (const SubdomainState& sub : domain.subdomains) {
    report.stored_rank.push_back(sub.lr.rank());
    report.intermediate_rank.push_back(sub.rank_intermediate);
  }
  return report;
}

std::size_t dof_count(std::span<const Eigen::Index> ranks, std::span<const Eigen::Index> cells,
                      Eigen::Index n_phi) {
  if (ranks.size() != cells.size()) {
    throw std::invalid_argument("dof_count: ranks and cell counts differ in length");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    total += static_cast<std::size_t>(ranks[i] * (cells[i] + n_phi + ranks[i]));
  }
  return total;
}

std::size_t stored_dof(const DomainState& domain) {
  std::vector<Eigen::Index> ranks;
  std::vector<Eigen::Index> cells;
  Eigen::Index n_phi = 0;
  for (const SubdomainState& s : domain.subdomains) {
    ranks.push_back(s.lr.rank());
    cells.push_back(s.lr.n_cells());
    n_phi = s.lr.n_phi();
  }
  return dof_count(ranks, cells, n_phi);
}

Matrix reconstruct(const DomainState& domain, const Problem& problem) {
  Matrix f(problem.grid.n_cells(), problem.angles.n_phi);
  for (std::size_t s = 0; s < domain.subdomains.size(); ++s) {
    const Matrix local = domain.subdomains[s].lr.reconstruct();
    const auto& cells = domain.topology.subdomains[s].global_cells;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      f.row(cells[c]) = local.row(static_cast<Eigen::Index>(c));
    }
  }
  return f;
}

Vector global_density(const DomainState& domain, const Problem& problem) {
  Vector rho(problem.grid.n_cells());
  for (std::size_t s = 0; s < domain.subdomains.size(); ++s) {
    const Vector local = density(domain.subdomains[s].lr, problem.angles.dphi);
    const auto& cells = domain.topology.subdomains[s].global_cells;
    for (std::size_t c = 0; c < cells.size(); ++c) rho[cells[c]] = local[static_cast<Eigen::Index>(c)];
  }
  return rho;
}

}  // namespace rtdlra
