#pragma once

// Block decomposition of the spatial grid into independently factorized
// subdomains that only talk through boundary packets.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rtdlra/integrator.hpp"
#include "rtdlra/problem.hpp"

namespace rtdlra {

inline constexpr int kPhysicalBoundary = -1;
inline constexpr std::uint32_t kPhysicalSender = 0xFFFFFFFFu;

struct SubdomainInfo {
  int id = 0;
  int block_i = 0;
  int block_j = 0;
  int i0 = 0;  // first global cell column
  int j0 = 0;  // first global cell row
  SpatialGrid grid;  // local grid with its physical extent
  std::array<int, 4> neighbor{kPhysicalBoundary, kPhysicalBoundary, kPhysicalBoundary,
                              kPhysicalBoundary};
  std::vector<Eigen::Index> global_cells;  // local cell index -> global cell index

  int neighbor_at(Side side) const { return neighbor[static_cast<int>(side)]; }
};

struct Topology {
  int blocks_x = 1;
  int blocks_y = 1;
  std::vector<SubdomainInfo> subdomains;

  static Topology make(const SpatialGrid& grid, int blocks_x, int blocks_y);

  /// Subdomain owning the global point (x, y).
  int locate(const SpatialGrid& grid, double x, double y) const;
};

struct SubdomainState {
  int id = 0;
  LowRankState lr;
  MaterialField material;
  Eigen::Index rank_intermediate = 0;  // max augmented rank during the last step
};

/// K restricted to one face of the sender, together with the sender's V.
struct BoundaryPacket {
  std::uint32_t sender = kPhysicalSender;
  Side side = Side::left;  // face of the sender the data was taken from
  Matrix k_slice;          // face cells x r
  Matrix v;                // n_phi x r
};

std::vector<std::uint8_t> encode_packet(const BoundaryPacket& packet);
/// Throws std::runtime_error on truncated or inconsistent input.
BoundaryPacket decode_packet(std::span<const std::uint8_t> bytes);

BoundaryPacket extract_boundary_packet(const SubdomainState& state,
                                       const SubdomainInfo& info, Side side);

/// Rank-1 packet that realizes the physical inflow on `side` of `info`.
BoundaryPacket physical_packet(const Problem& problem, const SubdomainInfo& info, Side side);

/// Boundary values in the basis own.v from the low and high neighbor packets.
BoundaryValues project_boundary(const LowRankState& own, const SubdomainInfo& info,
                                const BoundaryPacket& low, const BoundaryPacket& high,
                                Axis axis, const AngularGrid& angles);

struct ToleranceConfig {
  double tol = 0.0;
  Eigen::Index min_rank = 1;
  /// Also offer the directions the local advection operator generates. Needed
  /// for rank growth when no packet carries new information.
  bool self_augment = false;
  /// Relative level below which candidate directions count as round-off.
  double noise_floor = 1e-12;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AugmentResult {
  LowRankState state;
  Eigen::Index added = 0;
  bool clamped = false;
};

/// Enlarges V by the part of `candidates` (weighted angular directions, n_phi
/// x k) outside span(V) whose tail exceeds tol, and U by seeded random
/// columns. The reconstruction is unchanged.
AugmentResult augment_with(const LowRankState& state, const Matrix& candidates, double tol,
                           double noise_floor, std::uint64_t seed);

/// Candidate directions of a packet: V times the right singular pairs of K_slice.
Matrix packet_directions(const BoundaryPacket& packet);

AugmentResult augment(const LowRankState& state, const BoundaryPacket& low,
                      const BoundaryPacket& high, double tol, std::uint64_t seed,
                      double noise_floor = 1e-12);

LowRankState truncate(const LowRankState& state, double tol, Eigen::Index min_rank);

/// Called for every packet a subdomain receives during a step.
using PacketObserver = std::function<void(int receiver, const BoundaryPacket& packet)>;

struct DomainState {
  Topology topology;
  std::vector<SubdomainState> subdomains;
  std::uint64_t step_index = 0;
};

DomainState make_domain_state(const Problem& problem, int blocks_x, int blocks_y,
                              Eigen::Index initial_rank);

struct StepReport {
  std::vector<Eigen::Index> stored_rank;
  std::vector<Eigen::Index> intermediate_rank;
  double max_cfl = 0.0;
  std::vector<std::string> warnings;
};

StepReport dd_step(DomainState& domain, const Problem& problem, double dt,
                   const ToleranceConfig& config, const PacketObserver& observer = {});

/// sum_i r_i (cells_i + n_phi + r_i)
std::size_t dof_count(std::span<const Eigen::Index> ranks,
                      std::span<const Eigen::Index> cells, Eigen::Index n_phi);
std::size_t stored_dof(const DomainState& domain);

/// Dense (global cells x n_phi) reconstruction.
Matrix reconstruct(const DomainState& domain, const Problem& problem);
Vector global_density(const DomainState& domain, const Problem& problem);

}  // namespace rtdlra
