#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "oracles.hpp"
#include "rtdlra/baseline.hpp"
#include "rtdlra/decomposition.hpp"

using namespace rtdlra;

namespace {

LowRankState random_state(Eigen::Index nc, Eigen::Index m, Eigen::Index r,
                          std::mt19937_64& gen) {
  return {oracle::random_orthonormal(nc, r, gen), oracle::random_matrix(r, r, gen),
          oracle::random_orthonormal(m, r, gen)};
}

SubdomainInfo single_info(int nx, int ny) {
  SpatialGrid g;
  g.nx = nx;
  g.ny = ny;
  return Topology::make(g, 1, 1).subdomains.front();
}

BoundaryPacket random_packet(Eigen::Index cells, Eigen::Index m, Eigen::Index r, Side side,
                             std::mt19937_64& gen) {
  BoundaryPacket p;
  p.sender = 3;
  p.side = side;
  p.k_slice = oracle::random_matrix(cells, r, gen);
  p.v = oracle::random_orthonormal(m, r, gen);
  return p;
}

Problem small_problem(const std::string& kind, int n, int n_phi) {
  if (kind == "hohlraum") return build_hohlraum(n, n, n_phi);
  return build_lattice(n, n, n_phi);
}

}  // namespace

TEST(Topology, TilesTheGridExactly) {
  SpatialGrid g;
  g.nx = 12;
  g.ny = 9;
  const Topology t = Topology::make(g, 4, 3);
  ASSERT_EQ(t.subdomains.size(), 12u);
  std::set<Eigen::Index> seen;
  for (const auto& s : t.subdomains) {
    for (auto c : s.global_cells) EXPECT_TRUE(seen.insert(c).second);
    EXPECT_NEAR(s.grid.dx(), g.dx(), 1e-15);
    for (Side side : {Side::left, Side::right, Side::bottom, Side::top}) {
      const int nb = s.neighbor_at(side);
      if (nb != kPhysicalBoundary) {
        EXPECT_EQ(t.subdomains[nb].neighbor_at(opposite(side)), s.id);
      }
    }
  }
  EXPECT_EQ(seen.size(), 108u);
  EXPECT_EQ(t.locate(g, 0.0, 0.99), 8);
  EXPECT_EQ(t.locate(g, 0.99, 0.0), 3);
  EXPECT_THROW(Topology::make(g, 5, 3), ConfigError);
}

TEST(Packet, WireRoundTrip) {
  std::mt19937_64 gen(21);
  const BoundaryPacket p = random_packet(5, 8, 3, Side::top, gen);
  const auto bytes = encode_packet(p);
  EXPECT_EQ(bytes.size(), 15u + 8u * (15u + 24u));
  // header fields, little endian
  EXPECT_EQ(bytes[0], 3);
  EXPECT_EQ(bytes[4], static_cast<std::uint8_t>(Side::top));
  EXPECT_EQ(bytes[5], 3);
  EXPECT_EQ(bytes[7], 5);
  EXPECT_EQ(bytes[11], 8);
  // first payload double is K_slice(0,0), then K_slice(0,1): row-major
  double first, second;
  std::memcpy(&first, bytes.data() + 15, 8);
  std::memcpy(&second, bytes.data() + 23, 8);
  EXPECT_EQ(first, p.k_slice(0, 0));
  EXPECT_EQ(second, p.k_slice(0, 1));
  const BoundaryPacket q = decode_packet(bytes);
  EXPECT_EQ(q.sender, p.sender);
  EXPECT_EQ(q.side, p.side);
  EXPECT_EQ(q.k_slice, p.k_slice);
  EXPECT_EQ(q.v, p.v);
  auto cut = bytes;
  cut.pop_back();
  EXPECT_THROW(decode_packet(cut), std::runtime_error);
}

TEST(ExtractPacket, Examples) {
  const SubdomainInfo info = single_info(16, 16);
  SubdomainState s;
  s.lr = constant_state(256, 8, 2.0, 1);
  const BoundaryPacket p = extract_boundary_packet(s, info, Side::left);
  EXPECT_LE((p.k_slice.array() - p.k_slice(0, 0)).abs().maxCoeff(), 1e-15);
  EXPECT_LE((p.v.array() - 1.0 / std::sqrt(8.0)).abs().maxCoeff(), 1e-15);

  std::mt19937_64 gen(22);
  s.lr = random_state(256, 8, 4, gen);
  const Matrix f = s.lr.reconstruct();
  for (Side side : {Side::left, Side::right, Side::bottom, Side::top}) {
    const BoundaryPacket q = extract_boundary_packet(s, info, side);
    Matrix dense(16, 8);
    for (int c = 0; c < 16; ++c) {
      int i = c, j = c;
      if (side == Side::left) i = 0;
      if (side == Side::right) i = 15;
      if (side == Side::bottom) j = 0;
      if (side == Side::top) j = 15;
      dense.row(c) = f.row(i + 16 * j);
    }
    EXPECT_LE((q.k_slice * q.v.transpose() - dense).cwiseAbs().maxCoeff(), 1e-12);
  }
  s.lr.s.setZero();
  EXPECT_EQ(extract_boundary_packet(s, info, Side::top).k_slice.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PhysicalPacket, ConstantInflowOnIncomingHalfRange) {
  const Problem p = build_hohlraum(10, 10, 16);
  const Topology t = Topology::make(p.grid, 5, 5);
  const BoundaryPacket left = physical_packet(p, t.subdomains[0], Side::left);
  const Matrix f = left.k_slice * left.v.transpose();
  for (int k = 0; k < 16; ++k)
    EXPECT_NEAR(f(0, k), p.angles.x_positive[k], 1e-15);
  EXPECT_LE(orthonormality_defect(left.v), 1e-15);
  const BoundaryPacket right = physical_packet(p, t.subdomains[4], Side::right);
  EXPECT_EQ(right.k_slice.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ProjectBoundary, IdenticalBasesPartitionOfUnity) {
  std::mt19937_64 gen(23);
  const AngularGrid a = make_angular_grid(16);
  const SubdomainInfo info = single_info(6, 6);
  const LowRankState own = random_state(36, 16, 3, gen);
  const UpwindOperators ops(Axis::x, info.grid);
  SubdomainState st;
  st.lr = own;
  // neighbor carries exactly our own face data
  BoundaryPacket low = extract_boundary_packet(st, info, Side::left);
  low.side = Side::right;
  BoundaryPacket high = extract_boundary_packet(st, info, Side::right);
  high.side = Side::left;
  const BoundaryValues bv = project_boundary(own, info, low, high, Axis::x, a);
  EXPECT_LE((bv.low - ops.low_face(own.k())).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((bv.high - ops.high_face(own.k())).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ProjectBoundary, ZeroNeighborsKeepOutgoingPart) {
  std::mt19937_64 gen(24);
  const AngularGrid a = make_angular_grid(16);
  const SubdomainInfo info = single_info(6, 6);
  const LowRankState own = random_state(36, 16, 3, gen);
  BoundaryPacket zero{1, Side::top, Matrix::Zero(6, 2), oracle::random_orthonormal(16, 2, gen)};
  BoundaryPacket zero_low = zero;
  zero_low.side = Side::top;
  BoundaryPacket zero_high = zero;
  zero_high.side = Side::bottom;
  const BoundaryValues bv = project_boundary(own, info, zero_low, zero_high, Axis::y, a);
  const Matrix f = own.reconstruct();
  const UpwindOperators ops(Axis::y, info.grid);
  const Matrix ref_low = oracle::dense_face_projection(Matrix::Zero(6, 16), ops.low_face(f),
                                                       own.v, false, true);
  EXPECT_LE((bv.low - ref_low).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ProjectBoundary, MatchesDenseOracle) {
  std::mt19937_64 gen(25);
  const AngularGrid a = make_angular_grid(16);
  const SubdomainInfo info = single_info(8, 8);
  for (int trial = 0; trial < 20; ++trial) {
    const Axis axis = trial % 2 ? Axis::x : Axis::y;
    const UpwindOperators ops(axis, info.grid);
    const LowRankState own = random_state(64, 16, 1 + trial % 5, gen);
    const Side lo = axis == Axis::x ? Side::left : Side::bottom;
    const Side hi = axis == Axis::x ? Side::right : Side::top;
    const BoundaryPacket low = random_packet(8, 16, 2, hi, gen);
    const BoundaryPacket high = random_packet(8, 16, 2, lo, gen);
    const BoundaryValues bv = project_boundary(own, info, low, high, axis, a);
    const Matrix f = own.reconstruct();
    const Matrix ref_low = oracle::dense_face_projection(
        low.k_slice * low.v.transpose(), ops.low_face(f), own.v, axis == Axis::x, true);
    const Matrix ref_high = oracle::dense_face_projection(
        high.k_slice * high.v.transpose(), ops.high_face(f), own.v, axis == Axis::x, false);
    EXPECT_LE((bv.low - ref_low).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((bv.high - ref_high).cwiseAbs().maxCoeff(), 1e-12);
  }
  // packet from the wrong axis
  const LowRankState own = random_state(64, 16, 2, gen);
  EXPECT_THROW(project_boundary(own, info, random_packet(8, 16, 1, Side::top, gen),
                                random_packet(8, 16, 1, Side::left, gen), Axis::x, a),
               std::invalid_argument);
}

TEST(Augment, PreservesReconstruction) {
  std::mt19937_64 gen(26);
  std::uniform_int_distribution<int> rank(1, 8);
  for (int trial = 0; trial < 60; ++trial) {
    const int r = rank(gen);
    const LowRankState s = random_state(100, 16, r, gen);
    const auto low = random_packet(10, 16, rank(gen), Side::right, gen);
    const auto high = random_packet(10, 16, rank(gen), Side::left, gen);
    const double tol = trial % 3 == 0 ? 0.0 : 1e-3;
    const AugmentResult a = augment(s, low, high, tol, 7);
    const Matrix before = s.reconstruct();
    EXPECT_LE((a.state.reconstruct() - before).norm(), 1e-12 * before.norm());
    EXPECT_GE(a.state.rank(), s.rank());
    EXPECT_LE(orthonormality_defect(a.state.u), 1e-12);
    EXPECT_LE(orthonormality_defect(a.state.v), 1e-12);
  }
}

TEST(Augment, IdenticalNeighborBasisAddsNothing) {
  std::mt19937_64 gen(27);
  const LowRankState s = random_state(50, 16, 4, gen);
  BoundaryPacket p{0, Side::right, oracle::random_matrix(5, 4, gen), s.v};
  const AugmentResult a = augment(s, p, p, 0.0, 1);
  EXPECT_EQ(a.state.rank(), 4);
}

TEST(Augment, OrthogonalDirectionAboveTolerance) {
  std::mt19937_64 gen(28);
  const LowRankState s = random_state(50, 16, 3, gen);
  // unit direction orthogonal to V
  Matrix dir = oracle::random_matrix(16, 1, gen);
  dir -= s.v * (s.v.transpose() * dir);
  dir /= dir.norm();
  const double w = 0.05;
  BoundaryPacket p{0, Side::right, Matrix::Zero(5, 1), dir};
  p.k_slice(2, 0) = w;
  const BoundaryPacket none{0, Side::left, Matrix::Zero(5, 1), s.v.col(0)};
  const AugmentResult a = augment(s, p, none, 1e-3, 1);
  EXPECT_EQ(a.state.rank(), 4);
  EXPECT_NEAR(packet_directions(p).norm(), w, 1e-15);
  // the added basis vector is the orthogonal direction
  EXPECT_NEAR(std::abs((a.state.v.transpose() * dir).norm()), 1.0, 1e-12);
  const AugmentResult b = augment(s, p, none, 0.1, 1);
  EXPECT_EQ(b.state.rank(), 3);
}

TEST(Augment, InfiniteToleranceKeepsRank) {
  std::mt19937_64 gen(29);
  const LowRankState s = random_state(50, 16, 3, gen);
  const auto p = random_packet(5, 16, 4, Side::right, gen);
  const AugmentResult a = augment(s, p, p, std::numeric_limits<double>::infinity(), 1);
  EXPECT_EQ(a.state.rank(), 3);
}

TEST(Augment, ClampsAtFullRank) {
  std::mt19937_64 gen(30);
  // seven cells cap the rank at 7 although two new directions are offered
  const LowRankState s = random_state(7, 8, 6, gen);
  const auto p = random_packet(5, 8, 5, Side::right, gen);
  const AugmentResult a = augment(s, p, p, 0.0, 1);
  EXPECT_EQ(a.state.rank(), 7);
  EXPECT_TRUE(a.clamped);
  EXPECT_LE((a.state.reconstruct() - s.reconstruct()).norm(), 1e-12 * s.reconstruct().norm());
}

TEST(Truncate, Examples) {
  std::mt19937_64 gen(31);
  LowRankState s{oracle::random_orthonormal(30, 3, gen), Matrix::Zero(3, 3),
                 oracle::random_orthonormal(10, 3, gen)};
  s.s(0, 0) = 2.0;
  s.s(1, 1) = 0.5;
  EXPECT_EQ(truncate(s, 0.0, 1).rank(), 2);

  LowRankState t{oracle::random_orthonormal(30, 2, gen), Matrix::Zero(2, 2),
                 oracle::random_orthonormal(10, 2, gen)};
  t.s(0, 0) = 1.0;
  t.s(1, 1) = 1e-6;
  const LowRankState u = truncate(t, 1e-5, 1);
  EXPECT_EQ(u.rank(), 1);
  EXPECT_NEAR((u.reconstruct() - t.reconstruct()).norm(), 1e-6, 1e-15);
}

TEST(Truncate, ErrorBoundAndMinimality) {
  std::mt19937_64 gen(32);
  for (int trial = 0; trial < 60; ++trial) {
    LowRankState s = random_state(40, 12, 8, gen);
    Vector sigma(8);
    for (int j = 0; j < 8; ++j) sigma[j] = std::pow(10.0, -j);
    s.s = oracle::random_orthonormal(8, 8, gen) * sigma.asDiagonal() *
          oracle::random_orthonormal(8, 8, gen).transpose();
    const double tol = 3.0 * std::pow(10.0, -(trial % 9));
    const LowRankState t = truncate(s, tol, 1);
    EXPECT_LE((t.reconstruct() - s.reconstruct()).norm(), tol * (1 + 1e-10));
    if (t.rank() > 1) {
      const LowRankState shorter = truncate(s, 0.0, 1);
      double tail = 0.0;
      for (Eigen::Index j = t.rank() - 1; j < 8; ++j) tail += sigma[j] * sigma[j];
      EXPECT_GT(std::sqrt(tail), tol);
      (void)shorter;
    }
    EXPECT_GE(truncate(s, 10.0, 3).rank(), 3);
  }
}

TEST(DofCount, Formula) {
  const std::vector<Eigen::Index> r1{1}, c1{100};
  EXPECT_EQ(dof_count(r1, c1, 10), 111u);
  const std::vector<Eigen::Index> r2{2, 2}, c2{50, 50};
  EXPECT_EQ(dof_count(r2, c2, 10), 248u);
}

TEST(DdStep, VacuumWithoutInflowStaysZero) {
  Problem p = build_from_layout("vacuum", 8, 8, 8, BlockLayout(2, 2, BlockKind::vacuum),
                                hohlraum_materials(), {});
  p.f0 = 0.0;
  DomainState d = make_domain_state(p, 2, 2, 1);
  ToleranceConfig cfg;
  cfg.tol = 1e-8;
  for (int n = 0; n < 5; ++n) dd_step(d, p, p.time_step(), cfg);
  EXPECT_EQ(reconstruct(d, p).cwiseAbs().maxCoeff(), 0.0);
}

TEST(DdStep, SingleDomainMatchesClassic) {
  const Problem p = small_problem("lattice", 14, 8);
  const ToleranceConfig cfg = classic_config(1e-6, 1, 5);
  DomainState d = make_domain_state(p, 1, 1, 1);
  LowRankState c = initial_state(p, 1);
  for (int n = 0; n < 10; ++n) {
    dd_step(d, p, p.time_step(), cfg);
    c = classic_step(c, p, p.time_step(), cfg, static_cast<std::uint64_t>(n));
    EXPECT_LE((reconstruct(d, p) - c.reconstruct()).cwiseAbs().maxCoeff(), 1e-12 * 1e-9);
  }
}

TEST(DdStep, OnlyFaceNeighborsAreHeard) {
  const Problem p = small_problem("hohlraum", 15, 8);
  DomainState d = make_domain_state(p, 3, 3, 1);
  std::vector<std::set<std::uint32_t>> heard(9);
  ToleranceConfig cfg;
  cfg.tol = 1e-6;
  int packets = 0;
  dd_step(d, p, p.time_step(), cfg, [&](int receiver, const BoundaryPacket& pk) {
    heard[receiver].insert(pk.sender);
    ++packets;
  });
  EXPECT_EQ(packets, 9 * 4);
  for (const auto& info : d.topology.subdomains) {
    std::set<std::uint32_t> allowed;
    for (int nb : info.neighbor) {
      allowed.insert(nb == kPhysicalBoundary ? kPhysicalSender : static_cast<std::uint32_t>(nb));
    }
    for (auto s : heard[info.id]) EXPECT_TRUE(allowed.count(s)) << info.id << " heard " << s;
    EXPECT_EQ(heard[info.id], allowed);
  }
}

TEST(DdStep, SameSeedGivesIdenticalRanks) {
  const Problem p = small_problem("hohlraum", 15, 8);
  ToleranceConfig cfg;
  cfg.tol = 1e-4;
  cfg.seed = 99;
  auto trace = [&]() {
    DomainState d = make_domain_state(p, 3, 3, 1);
    std::vector<Eigen::Index> ranks;
    Matrix last;
    for (int n = 0; n < 8; ++n) {
      const StepReport r = dd_step(d, p, p.time_step(), cfg);
      ranks.insert(ranks.end(), r.intermediate_rank.begin(), r.intermediate_rank.end());
      ranks.insert(ranks.end(), r.stored_rank.begin(), r.stored_rank.end());
    }
    return std::make_pair(ranks, reconstruct(d, p));
  };
  const auto a = trace();
  const auto b = trace();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(DdStep, RankFloorsHold) {
  const Problem p = small_problem("hohlraum", 15, 8);
  DomainState d = make_domain_state(p, 3, 3, 1);
  ToleranceConfig cfg;
  cfg.tol = 1e-3;
  cfg.min_rank = 2;
  for (int n = 0; n < 5; ++n) {
    const StepReport r = dd_step(d, p, p.time_step(), cfg);
    for (std::size_t s = 0; s < r.stored_rank.size(); ++s) {
      EXPECT_GE(r.stored_rank[s], 1);
      EXPECT_GE(r.intermediate_rank[s], r.stored_rank[s]);
    }
  }
}
