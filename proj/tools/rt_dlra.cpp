#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rtdlra/cli_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Low-rank radiative transfer solver with domain decomposition"};
  app.require_subcommand(1);

  CLI::App* run_cmd = app.add_subcommand("run", "Run a configuration file");
  std::string config_path;
  std::vector<std::string> extra;
  std::map<std::string, std::string> flags;
  run_cmd->add_option("config", config_path, "Configuration file")->required();
  run_cmd->add_option("overrides", extra, "Extra key=value overrides");
  const std::vector<std::pair<std::string, std::string>> mirrored{
      {"--problem", "problem"},   {"--nx", "nx"},       {"--ny", "ny"},
      {"--n-phi", "n_phi"},       {"--tol", "tol"},     {"--solver", "solver"},
      {"--seed", "seed"},         {"--out", "output"},  {"--t-end", "t_end"},
      {"--blocks-x", "blocks_x"}, {"--blocks-y", "blocks_y"}, {"--cfl", "cfl"},
      {"--snapshots", "snapshots"}, {"--oracle", "oracle"}};
  for (const auto& [flag, key] : mirrored) {
    run_cmd->add_option(flag, flags[key], "Overrides '" + key + "'");
  }
  bool quiet = false;
  run_cmd->add_flag("-q,--quiet", quiet, "Suppress progress output");

  CLI::App* cmp_cmd = app.add_subcommand("compare", "Relative error between two finished runs");
  std::string run_a, run_b;
  cmp_cmd->add_option("run_a", run_a, "Run directory")->required();
  cmp_cmd->add_option("run_b", run_b, "Reference run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      std::map<std::string, std::string> overrides;
      for (const auto& [key, value] : flags) {
        if (!value.empty()) overrides[key] = value;
      }
      for (const auto& kv : extra) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          std::cerr << "error: override '" << kv << "' is not of the form key=value\n";
          return 2;
        }
        overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      const rtdlra::RunManifest m =
          rtdlra::run(rtdlra::load_config(config_path, overrides), quiet ? nullptr : &std::cout);
      if (!quiet) {
        std::cout << "finished after " << m.steps << " steps, " << m.snapshot_files.size()
                  << " snapshots\n";
        if (m.oracle_error) {
          std::cout << "relative error vs full tensor: " << std::setprecision(6)
                    << *m.oracle_error << '\n';
        }
      }
    } else if (*cmp_cmd) {
      std::cout << std::setprecision(17) << rtdlra::compare_runs(run_a, run_b) << '\n';
    }
  } catch (const rtdlra::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
