#pragma once

// Run configuration, orchestration and the plain-text output formats.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rtdlra/baseline.hpp"

namespace rtdlra {

enum class SolverKind { dd, classic, full_tensor };

const char* to_string(SolverKind kind);

struct RunConfig {
  std::string problem;  // lattice, hohlraum, point_source
  int nx = 0;
  int ny = 0;
  int n_phi = 0;
  int blocks_x = 1;
  int blocks_y = 1;
  double tol = 1e-5;
  double cfl = 0.5;
  double t_end = 0.0;
  std::vector<double> snapshots;
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::dd;
  std::filesystem::path output_dir;
  Eigen::Index min_rank = 1;
  Eigen::Index initial_rank = 1;
  double y0 = 0.85;
  double sigma = 0.01;
  std::optional<bool> self_augment;  // defaults to true for the classic solver only
  bool oracle = false;               // also run the full tensor solver and report the error
  std::optional<BlockLayout> layout;

  bool effective_self_augment() const {
    return self_augment.value_or(solver == SolverKind::classic);
  }
};

/// Parses `key = value` lines. `overrides` replace file values and are
/// validated the same way. `base_dir` resolves relative geometry paths.
RunConfig parse_config(std::string_view text,
                       const std::map<std::string, std::string>& overrides = {},
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path,
                      const std::map<std::string, std::string>& overrides = {});

Problem build_problem(const RunConfig& config);

struct RunManifest {
  std::string json;  // serialized manifest
  std::size_t steps = 0;
  std::vector<std::filesystem::path> snapshot_files;
  std::optional<double> oracle_error;
};

/// Steps to t_end, writing density snapshots, trace.csv, final_state.csv and
/// manifest.json into config.output_dir.
RunManifest run(const RunConfig& config, std::ostream* log = nullptr);

void write_density_csv(const Vector& rho, const SpatialGrid& grid,
                       const std::filesystem::path& path);
/// Reads the rho column back in file order.
Vector read_density_csv(const std::filesystem::path& path);

/// Dense global distribution stored by a finished run.
Matrix load_final_state(const std::filesystem::path& run_dir);

/// relative_error between the final states of two runs on the same grid.
double compare_runs(const std::filesystem::path& run_a, const std::filesystem::path& run_b);

/// Output root from RT_DLRA_OUTPUT_ROOT, or "runs".
std::filesystem::path default_output_root();

}  // namespace rtdlra
