#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "perifem/diagnostics.hpp"
#include "perifem/scenario.hpp"

using namespace perifem;

namespace {

struct PairSpec {
  bool two_dim = false;
  int degree = 1;
  bool colocated = false;
};

PairSpec parse_pair(const std::string& pair) {
  if (pair == "cg1-dg0") return {false, 1, false};
  if (pair == "cg2-dg1") return {false, 2, false};
  if (pair == "cg3-dg2") return {false, 3, false};
  if (pair == "colocated-cg1") return {false, 1, true};
  if (pair == "colocated-cg2") return {false, 2, true};
  if (pair == "colocated-cg3") return {false, 3, true};
  if (pair == "rt0-dg0") return {true, 1, false};
  if (pair == "rt1-dg1") return {true, 2, false};
  throw ConfigError("unknown space pair '" + pair + "'");
}

std::FILE* open_csv(const std::string& path, const char* header) {
  std::filesystem::path p = detail::resolve_output(path);
  std::FILE* fp = std::fopen(p.string().c_str(), "w");
  if (!fp) throw ConfigError("cannot open output file: " + p.string());
  std::fprintf(fp, "%s\n", header);
  return fp;
}

// Run-scenario subcommands share the config-file + per-key override plumbing.
struct RunArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_run_command(CLI::App& app, const std::string& name,
                     const std::string& desc, int& exit_rows) {
  CLI::App* cmd = app.add_subcommand(name, desc);
  auto args = std::make_shared<RunArgs>();
  cmd->add_option("--config", args->config_path, "flat key = value config file");
  static const char* keys[] = {"nx",        "ny",        "lx",
                               "ly",        "degree",    "f",
                               "g",         "H",         "apvm_tau",
                               "dt",        "n_steps",   "n_iter",
                               "preset",    "amplitude", "output",
                               "field_output", "solver_tol", "picard_tol"};
  for (const char* key : keys)
    cmd->add_option_function<std::string>(
        "--" + std::string(key),
        [args, key](const std::string& v) { args->overrides.emplace_back(key, v); },
        "override config key '" + std::string(key) + "'");
  cmd->callback([args, name, &exit_rows]() {
    ScenarioConfig cfg;
    if (!args->config_path.empty()) cfg = parse_config_file(args->config_path);
    cfg.model = name;
    for (const auto& [k, v] : args->overrides) apply_config_entry(cfg, k, v);
    RunResult res = run_scenario(cfg);
    std::printf("wrote %s: %d rows, final time %.17g\n",
                res.csv_path.string().c_str(), res.rows, res.final_time);
    exit_rows = res.rows;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compatible finite element shallow water / wave kernel"};
  app.require_subcommand(1);
  int rows_unused = 0;

  add_run_command(app, "wave1d", "1D wave equation run", rows_unused);
  add_run_command(app, "swe-linear", "linear rotating shallow water run",
                  rows_unused);
  add_run_command(app, "swe-nonlinear", "nonlinear rotating shallow water run",
                  rows_unused);

  // infsup
  {
    CLI::App* cmd = app.add_subcommand("infsup", "numerical inf-sup constants");
    auto pair = std::make_shared<std::string>("cg1-dg0");
    auto nes = std::make_shared<std::vector<int>>(std::vector<int>{8, 16, 32});
    auto length = std::make_shared<double>(1.0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--pair", *pair,
                    "cg{1,2,3}-dg{0,1,2} | colocated-cg{1,2,3} | rt0-dg0 | rt1-dg1");
    cmd->add_option("--ne", *nes, "mesh sizes")->delimiter(',');
    cmd->add_option("--length", *length, "domain length");
    cmd->add_option("--output", *out, "CSV output path");
    cmd->callback([pair, nes, length, out]() {
      PairSpec spec = parse_pair(*pair);
      std::FILE* fp = out->empty() ? nullptr : open_csv(*out, "ne,constant");
      for (int ne : *nes) {
        double c;
        if (spec.two_dim) {
          Mesh2D mesh = build_periodic_quad_mesh(*length, *length, ne, ne);
          c = infsup_constant_2d(mesh, spec.degree);
        } else {
          Mesh1D mesh = build_interval_mesh(*length, ne);
          c = infsup_constant_1d(mesh, spec.degree, spec.colocated);
        }
        std::printf("infsup %s ne=%d: C = %.12e\n", pair->c_str(), ne, c);
        if (fp) std::fprintf(fp, "%d,%.17g\n", ne, c);
      }
      if (fp) std::fclose(fp);
    });
  }

  // dispersion
  {
    CLI::App* cmd = app.add_subcommand("dispersion", "1D dispersion spectrum");
    auto pair = std::make_shared<std::string>("cg1-dg0");
    auto ne = std::make_shared<int>(16);
    auto speed = std::make_shared<double>(1.0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--pair", *pair, "cg{1,2,3}-dg{0,1,2} | colocated-cg{1,2,3}");
    cmd->add_option("--ne", *ne, "mesh size");
    cmd->add_option("--wave-speed", *speed, "wave speed");
    cmd->add_option("--output", *out, "CSV output path");
    cmd->callback([pair, ne, speed, out]() {
      PairSpec spec = parse_pair(*pair);
      if (spec.two_dim)
        throw ConfigError("dispersion supports 1D pairs only");
      DispersionResult res = dispersion_spectrum_1d(
          build_interval_mesh(1.0, *ne), spec.degree, spec.colocated, *speed);
      std::printf("dispersion %s ne=%d: %zu modes, %d zero\n",
                  res.label.c_str(), *ne, res.omega.size(), res.zero_count);
      std::size_t show = std::min<std::size_t>(res.omega.size(), 5);
      for (std::size_t i = 0; i < show; ++i)
        std::printf("  omega[%zu] = %.12e\n", i, res.omega[i]);
      if (!out->empty()) {
        std::FILE* fp = open_csv(*out, "index,omega");
        for (std::size_t i = 0; i < res.omega.size(); ++i)
          std::fprintf(fp, "%zu,%.17g\n", i, res.omega[i]);
        std::fclose(fp);
      }
    });
  }

  // audit
  {
    CLI::App* cmd = app.add_subcommand("audit", "DoF-ratio audit");
    auto v1 = std::make_shared<std::string>("rt0");
    auto v2 = std::make_shared<std::string>("dg0");
    auto mesh_arg = std::make_shared<std::string>("4x4");
    auto out = std::make_shared<std::string>();
    cmd->add_option("--v1", *v1, "rt0 | rt1");
    cmd->add_option("--v2", *v2, "dg0 | dg1");
    cmd->add_option("--mesh", *mesh_arg, "NxM");
    cmd->add_option("--output", *out, "CSV output path");
    cmd->callback([v1, v2, mesh_arg, out]() {
      auto degree_of = [](const std::string& s, const std::string& fam) {
        if (s.size() != fam.size() + 1 || s.compare(0, fam.size(), fam) != 0 ||
            !std::isdigit(static_cast<unsigned char>(s.back())))
          throw ConfigError("unknown space '" + s + "'");
        return s.back() - '0';
      };
      std::size_t x = mesh_arg->find('x');
      if (x == std::string::npos)
        throw ConfigError("mesh must be NxM, got '" + *mesh_arg + "'");
      int nx = detail::parse_int(mesh_arg->substr(0, x), 0, "mesh");
      int ny = detail::parse_int(mesh_arg->substr(x + 1), 0, "mesh");
      Mesh2D mesh = build_periodic_quad_mesh(1.0, 1.0, nx, ny);
      FunctionSpace V1 = make_space(mesh, Family::RT, degree_of(*v1, "rt"));
      FunctionSpace V2 = make_space(mesh, Family::DG, degree_of(*v2, "dg"));
      Rational r = dof_ratio_audit(V1, V2);
      std::printf("audit %s/%s on %dx%d: dim(V1)=%d dim(V2)=%d ratio = %lld/%lld\n",
                  v1->c_str(), v2->c_str(), nx, ny, V1.dim(), V2.dim(), r.num,
                  r.den);
      if (!out->empty()) {
        std::FILE* fp = open_csv(*out, "dim_v1,dim_v2,num,den");
        std::fprintf(fp, "%d,%d,%lld,%lld\n", V1.dim(), V2.dim(), r.num, r.den);
        std::fclose(fp);
      }
    });
  }

  // converge
  {
    CLI::App* cmd = app.add_subcommand("converge", "refinement study");
    auto model = std::make_shared<std::string>("wave1d");
    auto preset = std::make_shared<std::string>();
    auto degree = std::make_shared<int>(2);
    auto levels = std::make_shared<std::vector<int>>(std::vector<int>{8, 16, 32});
    auto field = std::make_shared<std::string>();
    auto dt0 = std::make_shared<double>(0.0);
    auto steps0 = std::make_shared<int>(0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--model", *model, "wave1d | swe-linear");
    cmd->add_option("--preset", *preset, "initial condition preset");
    cmd->add_option("--degree", *degree, "polynomial degree");
    cmd->add_option("--levels", *levels, "mesh sizes (>= 3)")->delimiter(',');
    cmd->add_option("--field", *field, "u | h");
    cmd->add_option("--dt0", *dt0, "time step on the coarsest level");
    cmd->add_option("--steps0", *steps0, "steps on the coarsest level");
    cmd->add_option("--output", *out, "CSV output path");
    cmd->callback([model, preset, degree, levels, field, dt0, steps0, out]() {
      if (levels->size() < 3)
        throw std::invalid_argument("converge: need at least 3 mesh levels");
      ScenarioConfig cfg;
      cfg.model = *model;
      const bool wave = *model == "wave1d";
      cfg.preset = preset->empty() ? (wave ? "travelling-wave" : "gravity-wave")
                                   : *preset;
      cfg.degree = *degree;
      cfg.f = 0.0;
      int n0 = levels->front();
      // dt proportional to the mesh spacing, within the Picard radius.
      cfg.dt = *dt0 > 0.0 ? *dt0 : (wave ? 0.1 : 0.25) * cfg.lx / n0;
      cfg.n_steps = *steps0 > 0
                        ? *steps0
                        : std::max(1, static_cast<int>(std::lround(0.5 / cfg.dt)));
      std::string fld = field->empty() ? (wave ? "u" : "h") : *field;
      auto rows = convergence_study(cfg, *levels, fld);
      std::FILE* fp = out->empty() ? nullptr : open_csv(*out, "n,error,order");
      std::printf("converge %s %s degree=%d field=%s\n", cfg.model.c_str(),
                  cfg.preset.c_str(), cfg.degree, fld.c_str());
      for (const auto& row : rows) {
        std::printf("  n=%-4d error=%.6e order=%.3f\n", row.n, row.error,
                    row.order);
        if (fp) std::fprintf(fp, "%d,%.17g,%.17g\n", row.n, row.error, row.order);
      }
      if (fp) std::fclose(fp);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const SolverFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  } catch (const StateInvalid& e) {
    std::fprintf(stderr, "invalid state: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
