#include "rtdlra/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rtdlra {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::dd: return "dd";
    case SolverKind::classic: return "classic";
    case SolverKind::full_tensor: return "full_tensor";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Entry {
  std::string value;
  std::string where;  // "line N" or "--flag"
};

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

template <class T>
T parse_number(const Entry& e, const std::string& key) {
  T out{};
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    fail(e.where, "cannot read '" + e.value + "' as a number for '" + key + "'");
  }
  return out;
}

bool parse_bool(const Entry& e, const std::string& key) {
  std::string v = e.value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  fail(e.where, "expected true or false for '" + key + "', got '" + e.value + "'");
}

struct BlockLine {
  int i = 0;
  int j = 0;
  BlockKind kind{};
  std::string where;
};

const std::regex& block_pattern() {
  static const std::regex re(R"(^block\s+(-?\d+)\s+(-?\d+)\s*=\s*(\w+)$)");
  return re;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "problem", "nx",     "ny",        "n_phi",        "blocks_x",     "blocks_y",
      "tol",     "cfl",    "t_end",     "snapshots",    "seed",         "solver",
      "output",  "min_rank", "initial_rank", "y0",      "sigma",        "self_augment",
      "oracle",  "geometry", "layout_blocks"};
  return keys;
}

// Reads key/value and block lines; geometry files only accept the latter.
void scan(std::string_view text, const std::string& origin, bool geometry_only,
          std::map<std::string, Entry>& entries, std::vector<BlockLine>& blocks) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string where = origin + "line " + std::to_string(number);
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    std::smatch m;
    if (std::regex_match(line, m, block_pattern())) {
      BlockLine b;
      b.i = std::stoi(m[1]);
      b.j = std::stoi(m[2]);
      try {
        b.kind = block_kind_from_string(m[3]);
      } catch (const ConfigError& e) {
        fail(where, e.what());
      }
      b.where = where;
      blocks.push_back(b);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(where, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!known_keys().count(key)) fail(where, "unknown key '" + key + "'");
    if (geometry_only && key != "layout_blocks") {
      fail(where, "only block lines and layout_blocks are allowed in a geometry file");
    }
    if (value.empty()) fail(where, "missing value for '" + key + "'");
    if (entries.count(key)) {
      fail(where, "duplicate key '" + key + "' (first set at " + entries[key].where + ")");
    }
    entries[key] = {value, where};
  }
}

std::vector<double> parse_list(const Entry& e, const std::string& key) {
  std::vector<double> out;
  std::string s = e.value;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(parse_number<double>({tok, e.where}, key));
  return out;
}

std::string format_time(double t) {
  std::ostringstream s;
  s << std::setprecision(10) << t;
  return s.str();
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::map<std::string, std::string>& overrides,
                       const fs::path& base_dir) {
  std::map<std::string, Entry> entries;
  std::vector<BlockLine> blocks;
  scan(text, "", false, entries, blocks);
  for (const auto& [key, value] : overrides) {
    const std::string where = "option --" + key;
    if (!known_keys().count(key)) fail(where, "unknown key '" + key + "'");
    entries[key] = {value, where};
  }
  if (entries.count("geometry")) {
    fs::path g = entries["geometry"].value;
    if (g.is_relative()) g = base_dir / g;
    std::ifstream in(g);
    if (!in) fail(entries["geometry"].where, "cannot open geometry file '" + g.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    scan(buf.str(), g.filename().string() + " ", true, entries, blocks);
  }

  std::vector<std::string> missing;
  for (const char* k : {"problem", "nx", "ny", "n_phi", "t_end"}) {
    if (!entries.count(k)) missing.push_back(k);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& k : missing) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("missing required keys: " + list);
  }

  RunConfig c;
  auto has = [&](const char* k) { return entries.count(k) > 0; };
  c.problem = entries["problem"].value;
  if (c.problem != "lattice" && c.problem != "hohlraum" && c.problem != "point_source") {
    fail(entries["problem"].where,
         "unknown problem '" + c.problem + "' (expected lattice, hohlraum or point_source)");
  }
  c.nx = parse_number<int>(entries["nx"], "nx");
  c.ny = parse_number<int>(entries["ny"], "ny");
  c.n_phi = parse_number<int>(entries["n_phi"], "n_phi");
  c.t_end = parse_number<double>(entries["t_end"], "t_end");
  if (has("blocks_x")) c.blocks_x = parse_number<int>(entries["blocks_x"], "blocks_x");
  if (has("blocks_y")) c.blocks_y = parse_number<int>(entries["blocks_y"], "blocks_y");
  if (has("tol")) c.tol = parse_number<double>(entries["tol"], "tol");
  if (has("cfl")) c.cfl = parse_number<double>(entries["cfl"], "cfl");
  if (has("snapshots")) c.snapshots = parse_list(entries["snapshots"], "snapshots");
  if (has("seed")) c.seed = parse_number<std::uint64_t>(entries["seed"], "seed");
  if (has("min_rank")) c.min_rank = parse_number<Eigen::Index>(entries["min_rank"], "min_rank");
  if (has("initial_rank")) {
    c.initial_rank = parse_number<Eigen::Index>(entries["initial_rank"], "initial_rank");
  }
  if (has("y0")) c.y0 = parse_number<double>(entries["y0"], "y0");
  if (has("sigma")) c.sigma = parse_number<double>(entries["sigma"], "sigma");
  if (has("self_augment")) c.self_augment = parse_bool(entries["self_augment"], "self_augment");
  if (has("oracle")) {
    const Entry& e = entries["oracle"];
    c.oracle = e.value == "full_tensor" ? true : parse_bool(e, "oracle");
  }
  if (has("solver")) {
    const Entry& e = entries["solver"];
    if (e.value == "dd") c.solver = SolverKind::dd;
    else if (e.value == "classic") c.solver = SolverKind::classic;
    else if (e.value == "full_tensor") c.solver = SolverKind::full_tensor;
    else fail(e.where, "unknown solver '" + e.value + "' (expected dd, classic or full_tensor)");
  }
  if (has("output")) c.output_dir = entries["output"].value;

  auto where = [&](const char* k) { return has(k) ? entries[k].where : std::string("defaults"); };
  if (c.nx < 1) fail(where("nx"), "nx must be positive");
  if (c.ny < 1) fail(where("ny"), "ny must be positive");
  if (c.n_phi < 1) fail(where("n_phi"), "n_phi must be positive");
  if (c.blocks_x < 1 || c.blocks_y < 1) fail(where("blocks_x"), "block counts must be positive");
  if (c.nx % c.blocks_x != 0) {
    fail(where("blocks_x"), "nx = " + std::to_string(c.nx) + " is not divisible by blocks_x = " +
                                std::to_string(c.blocks_x));
  }
  if (c.ny % c.blocks_y != 0) {
    fail(where("blocks_y"), "ny = " + std::to_string(c.ny) + " is not divisible by blocks_y = " +
                                std::to_string(c.blocks_y));
  }
  if (!(c.t_end >= 0.0)) fail(where("t_end"), "t_end must be nonnegative");
  if (!(c.tol >= 0.0)) fail(where("tol"), "tol must be nonnegative");
  if (!(c.cfl > 0.0)) fail(where("cfl"), "cfl must be positive");
  if (c.min_rank < 1) fail(where("min_rank"), "min_rank must be at least 1");
  if (c.initial_rank < 1) fail(where("initial_rank"), "initial_rank must be at least 1");
  if (!(c.sigma > 0.0)) fail(where("sigma"), "sigma must be positive");
  for (double t : c.snapshots) {
    if (!(t >= 0.0) || t > c.t_end) {
      fail(where("snapshots"), "snapshot time " + format_time(t) + " lies outside [0, t_end]");
    }
  }
  std::sort(c.snapshots.begin(), c.snapshots.end());
  c.snapshots.erase(std::unique(c.snapshots.begin(), c.snapshots.end()), c.snapshots.end());

  if (!blocks.empty() || has("layout_blocks")) {
    const bool lattice = c.problem == "lattice";
    BlockLayout layout = lattice ? default_lattice_layout() : default_hohlraum_layout();
    if (has("layout_blocks")) {
      const Entry& e = entries["layout_blocks"];
      const std::vector<double> dims = parse_list(e, "layout_blocks");
      if (dims.size() != 2 || dims[0] < 1 || dims[1] < 1 || dims[0] != std::floor(dims[0]) ||
          dims[1] != std::floor(dims[1])) {
        fail(e.where, "layout_blocks expects two positive integers");
      }
      const int bx = static_cast<int>(dims[0]);
      const int by = static_cast<int>(dims[1]);
      if (bx != layout.blocks_x || by != layout.blocks_y) {
        layout = BlockLayout(bx, by, lattice ? BlockKind::scatterer : BlockKind::vacuum);
      }
    }
    for (const BlockLine& b : blocks) {
      if (b.i < 1 || b.i > layout.blocks_x || b.j < 1 || b.j > layout.blocks_y) {
        fail(b.where, "block (" + std::to_string(b.i) + ", " + std::to_string(b.j) +
                          ") lies outside the " + std::to_string(layout.blocks_x) + "x" +
                          std::to_string(layout.blocks_y) + " layout (blocks count from 1)");
      }
      layout.set(b.i - 1, b.j - 1, b.kind);
    }
    c.layout = layout;
  }
  return c;
}

RunConfig load_config(const fs::path& path, const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), overrides, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.filename().string() + " " + e.what());
  }
}

Problem build_problem(const RunConfig& c) {
  Problem p;
  if (c.problem == "lattice") p = build_lattice(c.nx, c.ny, c.n_phi, c.layout);
  else if (c.problem == "hohlraum") p = build_hohlraum(c.nx, c.ny, c.n_phi, c.layout);
  else if (c.problem == "point_source") {
    p = build_point_source(c.nx, c.ny, c.n_phi, c.y0, c.sigma, c.layout);
  } else {
    throw ConfigError("unknown problem '" + c.problem + "'");
  }
  p.cfl = c.cfl;
  return p;
}

fs::path default_output_root() {
  if (const char* env = std::getenv("RT_DLRA_OUTPUT_ROOT"); env != nullptr && *env != '\0') {
    return env;
  }
  return "runs";
}

void write_density_csv(const Vector& rho, const SpatialGrid& grid, const fs::path& path) {
  if (rho.size() != grid.n_cells()) {
    throw std::invalid_argument("write_density_csv: field does not match the grid");
  }
  if (!rho.allFinite()) throw std::invalid_argument("write_density_csv: non-finite density");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "x,y,rho\n" << std::setprecision(17);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      out << grid.x_center(i) << ',' << grid.y_center(j) << ',' << rho[grid.index(i, j)] << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Vector read_density_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (trim(line) != "x,y,rho") throw std::runtime_error("'" + path.string() + "' has no x,y,rho header");
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto last = line.rfind(',');
    values.push_back(std::stod(line.substr(last + 1)));
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

namespace {

void write_factor(std::ostream& out, int sub, const char* name, const Matrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << sub << ',' << name << ',' << i << ',' << j << ',' << m(i, j) << '\n';
    }
  }
}

json config_json(const RunConfig& c) {
  json j;
  j["problem"] = c.problem;
  j["nx"] = c.nx;
  j["ny"] = c.ny;
  j["n_phi"] = c.n_phi;
  j["blocks_x"] = c.blocks_x;
  j["blocks_y"] = c.blocks_y;
  j["tol"] = c.tol;
  j["cfl"] = c.cfl;
  j["t_end"] = c.t_end;
  j["snapshots"] = c.snapshots;
  j["seed"] = c.seed;
  j["solver"] = to_string(c.solver);
  j["min_rank"] = c.min_rank;
  j["initial_rank"] = c.initial_rank;
  j["self_augment"] = c.effective_self_augment();
  j["oracle"] = c.oracle;
  if (c.problem == "point_source") {
    j["y0"] = c.y0;
    j["sigma"] = c.sigma;
  }
  if (c.layout) {
    json rows = json::array();
    for (int bj = c.layout->blocks_y - 1; bj >= 0; --bj) {
      std::string row;
      for (int bi = 0; bi < c.layout->blocks_x; ++bi) {
        row += (bi ? " " : "") + std::string(to_string(c.layout->at(bi, bj)));
      }
      rows.push_back(row);
    }
    j["layout_top_to_bottom"] = rows;
  }
  return j;
}

}  // namespace

RunManifest run(const RunConfig& config, std::ostream* log) {
  const auto wall_start = std::chrono::steady_clock::now();
  const Problem problem = build_problem(config);
  const bool low_rank = config.solver != SolverKind::full_tensor;
  const int bx = config.solver == SolverKind::dd ? config.blocks_x : 1;
  const int by = config.solver == SolverKind::dd ? config.blocks_y : 1;

  fs::path out_dir = config.output_dir;
  if (out_dir.empty()) {
    out_dir = default_output_root() / (config.problem + "_" + to_string(config.solver));
  }
  fs::create_directories(out_dir);

  ToleranceConfig tc;
  tc.tol = config.tol;
  tc.min_rank = config.min_rank;
  tc.seed = config.seed;
  tc.self_augment = config.effective_self_augment();

  DomainState domain;
  FullTensor dense;
  if (low_rank) {
    domain = make_domain_state(problem, bx, by, config.initial_rank);
  } else {
    dense = full_tensor_initial(problem);
  }
  std::optional<FullTensor> oracle;
  if (config.oracle) oracle = full_tensor_initial(problem);

  std::vector<Eigen::Index> cells;
  if (low_rank) {
    for (const auto& s : domain.subdomains) cells.push_back(s.lr.n_cells());
  } else {
    cells.push_back(problem.grid.n_cells());
  }
  const Eigen::Index n_phi = problem.angles.n_phi;

  std::ofstream trace(out_dir / "trace.csv");
  if (!trace) throw std::runtime_error("cannot write trace in '" + out_dir.string() + "'");
  trace << "step,t,dof_stored,dof_intermediate";
  if (low_rank) {
    for (std::size_t s = 0; s < cells.size(); ++s) trace << ",rank_" << s;
    for (std::size_t s = 0; s < cells.size(); ++s) trace << ",rt_" << s;
  }
  trace << '\n';

  json per_step = {{"t", json::array()},
                   {"max_stored_rank", json::array()},
                   {"max_intermediate_rank", json::array()},
                   {"dof_stored", json::array()},
                   {"dof_intermediate", json::array()}};
  std::vector<std::string> warnings;
  RunManifest manifest;

  auto density_now = [&]() -> Vector {
    return low_rank ? global_density(domain, problem)
                    : full_tensor_density(dense, problem.angles.dphi);
  };
  auto snapshot = [&](double t) {
    const fs::path path = out_dir / ("density_t" + format_time(t) + ".csv");
    write_density_csv(density_now(), problem.grid, path);
    manifest.snapshot_files.push_back(path);
  };

  std::vector<double> targets = config.snapshots;
  if (targets.empty() || targets.back() < config.t_end) targets.push_back(config.t_end);
  const double dt_nominal = problem.time_step();
  double t = 0.0;
  std::size_t step = 0;
  for (double target : targets) {
    if (target > t) {
      const auto n = static_cast<std::size_t>(
          std::max(1.0, std::ceil((target - t) / dt_nominal - 1e-9)));
      const double h = (target - t) / static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) {
        ++step;
        std::size_t dof_s = 0;
        std::size_t dof_i = 0;
        std::vector<Eigen::Index> stored, inter;
        if (low_rank) {
          StepReport r = dd_step(domain, problem, h, tc);
          stored = r.stored_rank;
          inter = r.intermediate_rank;
          dof_s = dof_count(stored, cells, n_phi);
          dof_i = dof_count(inter, cells, n_phi);
          for (auto& w : r.warnings) {
            if (warnings.size() < 32) warnings.push_back("step " + std::to_string(step) + ": " + w);
          }
        } else {
          dense = full_tensor_step(dense, problem, h);
          dof_s = dof_i = static_cast<std::size_t>(problem.grid.n_cells() * n_phi);
        }
        if (oracle) *oracle = full_tensor_step(*oracle, problem, h);
        t = k + 1 == n ? target : t + h;

        trace << step << ',' << std::setprecision(17) << t << ',' << dof_s << ',' << dof_i;
        for (auto r : stored) trace << ',' << r;
        for (auto r : inter) trace << ',' << r;
        trace << '\n';
        per_step["t"].push_back(t);
        per_step["dof_stored"].push_back(dof_s);
        per_step["dof_intermediate"].push_back(dof_i);
        per_step["max_stored_rank"].push_back(
            stored.empty() ? 0 : *std::max_element(stored.begin(), stored.end()));
        per_step["max_intermediate_rank"].push_back(
            inter.empty() ? 0 : *std::max_element(inter.begin(), inter.end()));
        if (log != nullptr && (step % 50 == 0 || (k + 1 == n && target == config.t_end))) {
          *log << "step " << step << "  t = " << std::setprecision(6) << t
               << "  stored dof = " << dof_s << '\n';
        }
      }
    }
    if (std::binary_search(config.snapshots.begin(), config.snapshots.end(), target)) {
      snapshot(target);
    }
  }

  {
    std::ofstream fsx(out_dir / "final_state.csv");
    fsx << "subdomain,factor,row,col,value\n" << std::setprecision(17);
    if (low_rank) {
      for (const auto& s : domain.subdomains) {
        write_factor(fsx, s.id, "U", s.lr.u);
        write_factor(fsx, s.id, "S", s.lr.s);
        write_factor(fsx, s.id, "V", s.lr.v);
      }
    } else {
      write_factor(fsx, 0, "F", dense.values);
    }
    if (!fsx) throw std::runtime_error("failed writing final_state.csv");
  }

  if (oracle) {
    const Matrix f = low_rank ? reconstruct(domain, problem) : dense.values;
    manifest.oracle_error = relative_error(f, oracle->values, problem.grid, problem.angles.dphi);
  }

  json j;
  j["config"] = config_json(config);
  j["grid"] = {{"nx", problem.grid.nx}, {"ny", problem.grid.ny}, {"n_phi", n_phi},
               {"dx", problem.grid.dx()}, {"dy", problem.grid.dy()},
               {"dphi", problem.angles.dphi}, {"dt_nominal", dt_nominal}};
  j["topology"] = {{"blocks_x", bx}, {"blocks_y", by}, {"subdomain_cells", cells}};
  j["steps"] = step;
  j["t_final"] = t;
  j["per_step"] = per_step;
  if (low_rank) {
    std::vector<Eigen::Index> final_ranks;
    for (const auto& s : domain.subdomains) final_ranks.push_back(s.lr.rank());
    j["final_stored_rank"] = final_ranks;
  }
  json snaps = json::array();
  for (const auto& s : manifest.snapshot_files) snaps.push_back(s.filename().string());
  j["snapshots"] = snaps;
  j["oracle_error"] = manifest.oracle_error ? json(*manifest.oracle_error) : json(nullptr);
  j["warnings"] = warnings;
  j["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  manifest.json = j.dump(2);
  manifest.steps = step;
  std::ofstream mf(out_dir / "manifest.json");
  mf << manifest.json << '\n';
  if (!mf) throw std::runtime_error("failed writing manifest.json");
  return manifest;
}

Matrix load_final_state(const fs::path& run_dir) {
  std::ifstream mf(run_dir / "manifest.json");
  if (!mf) throw std::runtime_error("no manifest.json in '" + run_dir.string() + "'");
  const json j = json::parse(mf);
  SpatialGrid grid;
  grid.nx = j.at("grid").at("nx").get<int>();
  grid.ny = j.at("grid").at("ny").get<int>();
  const int n_phi = j.at("grid").at("n_phi").get<int>();
  const int bx = j.at("topology").at("blocks_x").get<int>();
  const int by = j.at("topology").at("blocks_y").get<int>();
  const Topology topo = Topology::make(grid, bx, by);

  std::ifstream in(run_dir / "final_state.csv");
  if (!in) throw std::runtime_error("no final_state.csv in '" + run_dir.string() + "'");
  std::string line;
  std::getline(in, line);
  struct Factors {
    std::vector<std::array<double, 3>> u, s, v;
  };
  std::vector<Factors> subs(topo.subdomains.size());
  Matrix dense;
  bool have_dense = false;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string sub, name, i, jj, value;
    std::getline(row, sub, ',');
    std::getline(row, name, ',');
    std::getline(row, i, ',');
    std::getline(row, jj, ',');
    std::getline(row, value, ',');
    const std::array<double, 3> e{std::stod(i), std::stod(jj), std::stod(value)};
    if (name == "F") {
      if (!have_dense) dense = Matrix::Zero(grid.n_cells(), n_phi);
      have_dense = true;
      dense(static_cast<Eigen::Index>(e[0]), static_cast<Eigen::Index>(e[1])) = e[2];
      continue;
    }
    auto& f = subs.at(static_cast<std::size_t>(std::stoi(sub)));
    (name == "U" ? f.u : name == "S" ? f.s : f.v).push_back(e);
  }
  if (have_dense) return dense;

  auto assemble = [](const std::vector<std::array<double, 3>>& entries) {
    Eigen::Index rows = 0, cols = 0;
    for (const auto& e : entries) {
      rows = std::max(rows, static_cast<Eigen::Index>(e[0]) + 1);
      cols = std::max(cols, static_cast<Eigen::Index>(e[1]) + 1);
    }
    Matrix m = Matrix::Zero(rows, cols);
    for (const auto& e : entries) m(static_cast<Eigen::Index>(e[0]), static_cast<Eigen::Index>(e[1])) = e[2];
    return m;
  };
  Matrix f(grid.n_cells(), n_phi);
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const Matrix local = assemble(subs[s].u) * assemble(subs[s].s) * assemble(subs[s].v).transpose();
    const auto& cells = topo.subdomains[s].global_cells;
    if (local.rows() != static_cast<Eigen::Index>(cells.size()) || local.cols() != n_phi) {
      throw std::runtime_error("final_state.csv does not match the manifest grid");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) f.row(cells[c]) = local.row(static_cast<Eigen::Index>(c));
  }
  return f;
}

double compare_runs(const fs::path& run_a, const fs::path& run_b) {
  std::ifstream mf(run_a / "manifest.json");
  if (!mf) throw std::runtime_error("no manifest.json in '" + run_a.string() + "'");
  const json j = json::parse(mf);
  SpatialGrid grid;
  grid.nx = j.at("grid").at("nx").get<int>();
  grid.ny = j.at("grid").at("ny").get<int>();
  const double dphi = j.at("grid").at("dphi").get<double>();
  const Matrix a = load_final_state(run_a);
  const Matrix b = load_final_state(run_b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::runtime_error("runs use different grids and cannot be compared");
  }
  return relative_error(a, b, grid, dphi);
}

}  // namespace rtdlra
