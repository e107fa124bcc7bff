#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "perifem/scenario.hpp"

using namespace perifem;

namespace {

std::filesystem::path test_dir() {
  static std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("perifem_scenario_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  std::string cmd =
      std::string(PERIFEM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config serialisation round-trips every field", "[scenario]") {
  ScenarioConfig c;
  c.model = "swe-nonlinear";
  c.nx = 24;
  c.ny = 12;
  c.lx = 2.5;
  c.ly = 0.75;
  c.degree = 2;
  c.f = 1.0625;
  c.g = 9.80665;
  c.H = 0.123456789012345678;
  c.apvm_tau = 1e-3;
  c.dt = 0.0017;
  c.n_steps = 321;
  c.n_iter = 7;
  c.preset = "vortex-pair";
  c.amplitude = -0.037;
  c.output = "runs/diag.csv";
  c.field_output = "runs/fields.csv";
  c.solver_tol = 3e-13;
  c.picard_tol = 2e-14;
  REQUIRE(parse_config_string(serialize_config(c)) == c);
}

TEST_CASE("config parser reports unknown keys with their line", "[scenario]") {
  REQUIRE_THROWS_MATCHES(
      parse_config_string("model = wave1d\nfrobnicate = 3\n"), ConfigError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("line 2") &&
          Catch::Matchers::ContainsSubstring("frobnicate")));
  REQUIRE_THROWS_AS(parse_config_string("model wave1d\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_string("dt = fast\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_string("nx = 2.5\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_string("= 3\n"), ConfigError);
}

TEST_CASE("config parser accepts comments and blank lines", "[scenario]") {
  ScenarioConfig c = parse_config_string(
      "# a comment\n\n  model = swe-linear  \n  preset= geostrophic\nf =2.0\n");
  REQUIRE(c.model == "swe-linear");
  REQUIRE(c.preset == "geostrophic");
  REQUIRE(c.f == 2.0);
}

TEST_CASE("config validation rejects inconsistent settings", "[scenario]") {
  ScenarioConfig c;
  c.model = "swe-X";
  REQUIRE_THROWS_AS(validate_config(c), ConfigError);
  c = ScenarioConfig{};
  c.preset = "geostrophic";  // not a wave1d preset
  REQUIRE_THROWS_AS(validate_config(c), ConfigError);
  c = ScenarioConfig{};
  c.model = "swe-linear";
  c.preset = "standing-wave";
  REQUIRE_THROWS_AS(validate_config(c), ConfigError);
  c = ScenarioConfig{};
  c.dt = 0.0;
  REQUIRE_THROWS_AS(validate_config(c), ConfigError);
  c = ScenarioConfig{};
  c.model = "swe-linear";
  c.preset = "geostrophic";
  c.degree = 3;  // 2D spaces stop at degree 2
  REQUIRE_THROWS_AS(validate_config(c), ConfigError);
  c = ScenarioConfig{};
  c.g = -1.0;
  REQUIRE_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("standing wave run writes one row per time level with constant energy",
          "[scenario]") {
  ScenarioConfig cfg;
  cfg.model = "wave1d";
  cfg.preset = "standing-wave";
  cfg.nx = 16;
  cfg.dt = 0.01;
  cfg.n_steps = 100;
  cfg.output = (test_dir() / "standing.csv").string();
  RunResult res = run_scenario(cfg);
  REQUIRE(res.rows == 101);
  auto rows = read_csv(res.csv_path);
  REQUIRE(rows.size() == 102);  // header + 101 records
  REQUIRE(rows[0] == std::vector<std::string>{"step", "time", "mass", "energy",
                                              "total_vorticity", "enstrophy",
                                              "balance_residual"});
  double e0 = std::stod(rows[1][3]);
  for (std::size_t r = 1; r < rows.size(); ++r)
    REQUIRE(std::stod(rows[r][3]) == Catch::Approx(e0).margin(1e-11));
}

TEST_CASE("scenario output is byte deterministic", "[scenario]") {
  ScenarioConfig cfg;
  cfg.model = "swe-nonlinear";
  cfg.preset = "vortex-pair";
  cfg.nx = cfg.ny = 4;
  cfg.dt = 0.01;
  cfg.n_steps = 5;
  cfg.output = (test_dir() / "det_a.csv").string();
  cfg.field_output = (test_dir() / "det_fields_a.csv").string();
  run_scenario(cfg);
  ScenarioConfig cfg2 = cfg;
  cfg2.output = (test_dir() / "det_b.csv").string();
  cfg2.field_output = (test_dir() / "det_fields_b.csv").string();
  run_scenario(cfg2);
  REQUIRE(slurp(cfg.output) == slurp(cfg2.output));
  REQUIRE(slurp(cfg.field_output) == slurp(cfg2.field_output));
}

TEST_CASE("geostrophic linear run keeps the balance residual tiny",
          "[scenario]") {
  ScenarioConfig cfg;
  cfg.model = "swe-linear";
  cfg.preset = "geostrophic";
  cfg.f = 1.0;
  cfg.nx = cfg.ny = 8;
  cfg.dt = 0.02;
  cfg.n_steps = 100;
  cfg.solver_tol = 1e-14;
  cfg.output = (test_dir() / "geo.csv").string();
  RunResult res = run_scenario(cfg);
  auto rows = read_csv(res.csv_path);
  REQUIRE(rows.size() == 102);
  for (std::size_t r = 1; r < rows.size(); ++r)
    REQUIRE(std::stod(rows[r][6]) <= 1e-10);
}

TEST_CASE("field dumps round-trip the coefficient vectors exactly",
          "[scenario]") {
  ScenarioConfig cfg;
  cfg.model = "wave1d";
  cfg.preset = "travelling-wave";
  cfg.nx = 8;
  cfg.degree = 2;
  cfg.dt = 0.01;
  cfg.n_steps = 3;
  cfg.output = (test_dir() / "trav.csv").string();
  cfg.field_output = (test_dir() / "trav_fields.csv").string();
  run_scenario(cfg);

  // Reproduce the run in-process and compare parsed coefficients bitwise.
  auto mesh = std::make_shared<Mesh1D>(build_interval_mesh(cfg.lx, cfg.nx));
  Wave1DSystem sys(mesh, cfg.degree, cfg.solver_tol, cfg.picard_tol);
  Wave1DState s = wave1d_initial(sys, cfg);
  for (int k = 0; k < cfg.n_steps; ++k) s = sys.step(s, cfg.dt);

  auto rows = read_csv(cfg.field_output);
  REQUIRE(rows.size() ==
          1 + static_cast<std::size_t>(sys.V0().dim() + sys.V1().dim()));
  REQUIRE(rows[0] == std::vector<std::string>{"entity_kind", "dof_index", "value"});
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    REQUIRE(cells.size() == 3);
    int idx = std::stoi(cells[1]);
    double v = std::stod(cells[2]);
    if (cells[0] == "u/CG2") REQUIRE(v == s.u.coeffs[idx]);
    else if (cells[0] == "h/DG1") REQUIRE(v == s.h.coeffs[idx]);
    else FAIL("unexpected entity kind " << cells[0]);
  }

  std::ifstream side(cfg.field_output + ".json");
  REQUIRE(side.good());
  nlohmann::json meta = nlohmann::json::parse(side);
  REQUIRE(meta["dims"]["u"] == sys.V0().dim());
  REQUIRE(meta["dims"]["h"] == sys.V1().dim());
  REQUIRE(meta["model"] == "wave1d");
}

TEST_CASE("output directory environment override is honoured", "[scenario]") {
  auto dir = test_dir() / "env_override";
  ::setenv("PERIFEM_OUTPUT_DIR", dir.c_str(), 1);
  ScenarioConfig cfg;
  cfg.model = "wave1d";
  cfg.preset = "standing-wave";
  cfg.nx = 8;
  cfg.n_steps = 1;
  cfg.output = "nested/out.csv";
  RunResult res = run_scenario(cfg);
  ::unsetenv("PERIFEM_OUTPUT_DIR");
  REQUIRE(res.csv_path == dir / "nested" / "out.csv");
  REQUIRE(std::filesystem::exists(res.csv_path));
}

TEST_CASE("convergence study demands three mesh levels", "[scenario]") {
  ScenarioConfig cfg;
  cfg.model = "wave1d";
  cfg.preset = "travelling-wave";
  REQUIRE_THROWS_AS(convergence_study(cfg, {8, 16}), std::invalid_argument);
  REQUIRE_THROWS_AS(convergence_study(cfg, {8, 16, 32}, "psi"),
                    std::invalid_argument);
  cfg.model = "swe-nonlinear";
  cfg.preset = "vortex-pair";
  REQUIRE_THROWS_AS(convergence_study(cfg, {8, 16, 32}, "h"),
                    std::invalid_argument);
}

TEST_CASE("travelling wave refinement converges at the expected orders",
          "[scenario]") {
  ScenarioConfig cfg;
  cfg.model = "wave1d";
  cfg.preset = "travelling-wave";
  cfg.degree = 2;
  cfg.dt = 0.1 / 8;
  cfg.n_steps = 40;  // T = 0.5
  auto rows = convergence_study(cfg, {8, 16, 32}, "u");
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 1; i < rows.size(); ++i) REQUIRE(rows[i].order >= 1.8);

  cfg.degree = 1;
  auto rows1 = convergence_study(cfg, {8, 16, 32}, "u");
  for (std::size_t i = 1; i < rows1.size(); ++i)
    REQUIRE(rows1[i].error < rows1[i - 1].error);
}

TEST_CASE("gravity wave refinement converges for the layer depth",
          "[scenario]") {
  ScenarioConfig cfg;
  cfg.model = "swe-linear";
  cfg.preset = "gravity-wave";
  cfg.degree = 1;
  cfg.f = 0.0;
  cfg.dt = 0.25 / 8;
  cfg.n_steps = 16;  // T = 0.5
  auto rows = convergence_study(cfg, {8, 16, 32}, "h");
  for (std::size_t i = 1; i < rows.size(); ++i) REQUIRE(rows[i].order >= 0.8);
}

TEST_CASE("gravity wave preset requires zero Coriolis parameter", "[scenario]") {
  ScenarioConfig cfg;
  cfg.model = "swe-linear";
  cfg.preset = "gravity-wave";
  cfg.f = 0.5;
  cfg.nx = cfg.ny = 4;
  cfg.output = (test_dir() / "never.csv").string();
  REQUIRE_THROWS_AS(run_scenario(cfg), ConfigError);
}

TEST_CASE("cli subcommands succeed and fail with the documented exit codes",
          "[scenario][cli]") {
  auto dir = test_dir();
  ScenarioConfig cfg;
  cfg.model = "wave1d";
  cfg.preset = "standing-wave";
  cfg.nx = 8;
  cfg.n_steps = 4;
  cfg.output = (dir / "cli_run.csv").string();
  std::ofstream((dir / "good.cfg")) << serialize_config(cfg);
  REQUIRE(run_cli("wave1d --config " + (dir / "good.cfg").string()) == 0);
  REQUIRE(read_csv(dir / "cli_run.csv").size() == 6);

  std::ofstream((dir / "bad.cfg")) << "model = wave1d\nwhat = 1\n";
  auto missing = dir / "no_such_output.csv";
  REQUIRE(run_cli("wave1d --config " + (dir / "bad.cfg").string() +
                  " --output " + missing.string()) == 2);
  REQUIRE_FALSE(std::filesystem::exists(missing));

  REQUIRE(run_cli("swe-nonlinear --nx 8 --ny 8 --preset vortex-pair --dt 99 "
                  "--n_steps 1 --output " +
                  (dir / "blowup.csv").string()) == 3);

  REQUIRE(run_cli("infsup --pair cg1-dg0 --ne 8") == 0);
  REQUIRE(run_cli("infsup --pair nosuch --ne 8") == 2);
  REQUIRE(run_cli("dispersion --pair colocated-cg1 --ne 16") == 0);
  REQUIRE(run_cli("audit --v1 rt0 --v2 dg0 --mesh 4x4") == 0);
  REQUIRE(run_cli("audit --v1 rt0 --v2 dg0 --mesh 4by4") == 2);
  REQUIRE(run_cli("converge --model wave1d --levels 8,16") == 2);
  REQUIRE(run_cli("no-such-subcommand") == 2);
  REQUIRE(run_cli("--help") == 0);
}
