#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "perifem/diagnostics.hpp"
#include "perifem/errors.hpp"
#include "perifem/models.hpp"

namespace perifem {

// A complete run description.  Flat key = value text files map one key per
// field; unknown keys are rejected at parse time.
struct ScenarioConfig {
  std::string model = "wave1d";  // wave1d | swe-linear | swe-nonlinear
  int nx = 16;
  int ny = 16;  // ignored by wave1d
  double lx = 1.0;
  double ly = 1.0;
  int degree = 1;
  double f = 0.0;
  double g = 1.0;
  double H = 1.0;
  double apvm_tau = 0.0;
  double dt = 0.01;
  int n_steps = 100;
  int n_iter = 4;
  std::string preset = "standing-wave";
  double amplitude = 0.1;
  std::string output = "diagnostics.csv";
  std::string field_output;  // empty: no field dump
  double solver_tol = 1e-12;
  double picard_tol = 1e-13;

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, int line, const std::string& key) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "': not a number: '" + v + "'");
  }
  if (pos != v.size())
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "': trailing characters in '" + v + "'");
  return x;
}

inline int parse_int(const std::string& v, int line, const std::string& key) {
  double x = parse_double(v, line, key);
  int i = static_cast<int>(x);
  if (static_cast<double>(i) != x)
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "': not an integer: '" + v + "'");
  return i;
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Applies one key = value pair; shared by the file parser and CLI overrides.
inline void apply_config_entry(ScenarioConfig& cfg, const std::string& key,
                               const std::string& value, int line = 0) {
  using detail::parse_double;
  using detail::parse_int;
  if (key == "model") cfg.model = value;
  else if (key == "nx") cfg.nx = parse_int(value, line, key);
  else if (key == "ny") cfg.ny = parse_int(value, line, key);
  else if (key == "lx") cfg.lx = parse_double(value, line, key);
  else if (key == "ly") cfg.ly = parse_double(value, line, key);
  else if (key == "degree") cfg.degree = parse_int(value, line, key);
  else if (key == "f") cfg.f = parse_double(value, line, key);
  else if (key == "g") cfg.g = parse_double(value, line, key);
  else if (key == "H") cfg.H = parse_double(value, line, key);
  else if (key == "apvm_tau") cfg.apvm_tau = parse_double(value, line, key);
  else if (key == "dt") cfg.dt = parse_double(value, line, key);
  else if (key == "n_steps") cfg.n_steps = parse_int(value, line, key);
  else if (key == "n_iter") cfg.n_iter = parse_int(value, line, key);
  else if (key == "preset") cfg.preset = value;
  else if (key == "amplitude") cfg.amplitude = parse_double(value, line, key);
  else if (key == "output") cfg.output = value;
  else if (key == "field_output") cfg.field_output = value;
  else if (key == "solver_tol") cfg.solver_tol = parse_double(value, line, key);
  else if (key == "picard_tol") cfg.picard_tol = parse_double(value, line, key);
  else
    throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key +
                      "'");
}

inline ScenarioConfig parse_config(std::istream& in) {
  ScenarioConfig cfg;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    std::string key = detail::trim(s.substr(0, eq));
    std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line) + ": empty key");
    apply_config_entry(cfg, key, value, line);
  }
  return cfg;
}

inline ScenarioConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ScenarioConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

// Serialises every field; parsing the result reproduces the config exactly.
inline std::string serialize_config(const ScenarioConfig& cfg) {
  using detail::fmt_double;
  std::ostringstream out;
  out << "model = " << cfg.model << "\n";
  out << "nx = " << cfg.nx << "\n";
  out << "ny = " << cfg.ny << "\n";
  out << "lx = " << fmt_double(cfg.lx) << "\n";
  out << "ly = " << fmt_double(cfg.ly) << "\n";
  out << "degree = " << cfg.degree << "\n";
  out << "f = " << fmt_double(cfg.f) << "\n";
  out << "g = " << fmt_double(cfg.g) << "\n";
  out << "H = " << fmt_double(cfg.H) << "\n";
  out << "apvm_tau = " << fmt_double(cfg.apvm_tau) << "\n";
  out << "dt = " << fmt_double(cfg.dt) << "\n";
  out << "n_steps = " << cfg.n_steps << "\n";
  out << "n_iter = " << cfg.n_iter << "\n";
  out << "preset = " << cfg.preset << "\n";
  out << "amplitude = " << fmt_double(cfg.amplitude) << "\n";
  out << "output = " << cfg.output << "\n";
  out << "field_output = " << cfg.field_output << "\n";
  out << "solver_tol = " << fmt_double(cfg.solver_tol) << "\n";
  out << "picard_tol = " << fmt_double(cfg.picard_tol) << "\n";
  return out.str();
}

inline void validate_config(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.model != "wave1d" && cfg.model != "swe-linear" &&
      cfg.model != "swe-nonlinear")
    fail("model must be wave1d, swe-linear or swe-nonlinear, got '" + cfg.model +
         "'");
  if (cfg.nx < 1) fail("nx must be positive");
  if (cfg.model != "wave1d" && cfg.ny < 1) fail("ny must be positive");
  if (!(cfg.lx > 0.0)) fail("lx must be positive");
  if (cfg.model != "wave1d" && !(cfg.ly > 0.0)) fail("ly must be positive");
  int pmax = cfg.model == "wave1d" ? 3 : 2;
  if (cfg.degree < 1 || cfg.degree > pmax)
    fail("degree must be in 1.." + std::to_string(pmax) + " for " + cfg.model);
  if (!(cfg.dt > 0.0)) fail("dt must be positive");
  if (cfg.n_steps < 0) fail("n_steps must be non-negative");
  if (cfg.n_iter < 1) fail("n_iter must be at least 1");
  if (!std::isfinite(cfg.amplitude)) fail("amplitude must be finite");
  if (!(cfg.solver_tol > 0.0) || !(cfg.picard_tol > 0.0))
    fail("solver tolerances must be positive");
  try {
    validate(SWEParams{cfg.f, cfg.g, cfg.H, cfg.apvm_tau});
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  const bool wave_preset =
      cfg.preset == "standing-wave" || cfg.preset == "travelling-wave";
  const bool swe_preset = cfg.preset == "geostrophic" ||
                          cfg.preset == "gravity-wave" ||
                          cfg.preset == "vortex-pair";
  if (cfg.model == "wave1d" && !wave_preset)
    fail("preset '" + cfg.preset + "' is not a wave1d preset");
  if (cfg.model != "wave1d" && !swe_preset)
    fail("preset '" + cfg.preset + "' is not a shallow water preset");
  if (cfg.output.empty()) fail("output path must not be empty");
}

namespace detail {

inline std::filesystem::path resolve_output(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("PERIFEM_OUTPUT_DIR"))
      p = std::filesystem::path(dir) / p;
  }
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p;
}

inline void write_record(std::FILE* fp, const DiagnosticRecord& r) {
  std::fprintf(fp, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.time,
               r.mass, r.energy, r.total_vorticity, r.enstrophy,
               r.balance_residual);
}

inline void dump_field_csv(std::FILE* fp, const std::string& kind,
                           const Eigen::VectorXd& coeffs) {
  for (Eigen::Index i = 0; i < coeffs.size(); ++i)
    std::fprintf(fp, "%s,%lld,%.17g\n", kind.c_str(),
                 static_cast<long long>(i), coeffs[i]);
}

inline std::string space_label(const FunctionSpace& V) {
  switch (V.family) {
    case Family::CG: return "CG" + std::to_string(V.degree);
    case Family::DG: return "DG" + std::to_string(V.degree);
    case Family::RT: return "RT" + std::to_string(V.degree);
  }
  return "?";
}

}  // namespace detail

// Closed-form initial conditions.  With A the amplitude, k = 2 pi / lx and
// c = sqrt(g H):
//   standing-wave    u = 0,                    h = A cos(k x)
//   travelling-wave  u = A cos(k x),           h = A cos(k x)       (speed 1)
//   geostrophic      u = grad^perp psi,        h = (f/g) psi,
//                    psi = A sin(k x) sin(2 pi y / ly)
//   gravity-wave     u = (A sqrt(g/H) cos(k x), 0), h = A cos(k x)  (f = 0)
//   vortex-pair      u = grad^perp psi, psi as above, depth H
// For the two shallow water models h above is the perturbation; the nonlinear
// model adds the mean depth H to form the full layer depth.
inline Wave1DState wave1d_initial(const Wave1DSystem& sys,
                                  const ScenarioConfig& cfg) {
  const double k = 2.0 * std::numbers::pi / cfg.lx;
  const double A = cfg.amplitude;
  Wave1DState s = sys.zero_state();
  s.h = interpolate(sys.V1(),
                    [&](double x, double) { return A * std::cos(k * x); });
  if (cfg.preset == "travelling-wave")
    s.u = interpolate(sys.V0(),
                      [&](double x, double) { return A * std::cos(k * x); });
  return s;
}

inline SWEState swe_initial(const SWESolver& sys, const ScenarioConfig& cfg) {
  const double kx = 2.0 * std::numbers::pi / cfg.lx;
  const double ky = 2.0 * std::numbers::pi / cfg.ly;
  const double A = cfg.amplitude;
  SWEState s = sys.zero_state();
  if (cfg.preset == "geostrophic" || cfg.preset == "vortex-pair") {
    FEFunction psi = interpolate(sys.V0(), [&](double x, double y) {
      return A * std::sin(kx * x) * std::sin(ky * y);
    });
    if (cfg.preset == "geostrophic") {
      s = sys.geostrophic_init(psi);
    } else {
      s.u.coeffs = sys.G().apply(psi.coeffs);
    }
  } else if (cfg.preset == "gravity-wave") {
    if (cfg.f != 0.0)
      throw ConfigError("gravity-wave preset requires f = 0");
    double r = A * std::sqrt(cfg.g / cfg.H);
    s.u = interpolate(sys.V1(), [&](double x, double) -> std::array<double, 2> {
      return {r * std::cos(kx * x), 0.0};
    });
    s.h = interpolate(sys.V2(),
                      [&](double x, double) { return A * std::cos(kx * x); });
  }
  if (cfg.model == "swe-nonlinear")
    s.h.coeffs.array() += cfg.H;  // perturbation -> full depth
  return s;
}

struct RunResult {
  std::filesystem::path csv_path;
  int rows = 0;  // data rows written (n_steps + 1)
  double final_time = 0.0;
};

// Runs a configured scenario and writes the diagnostics CSV (header plus one
// row per time level, including the initial one).  Output is deterministic
// for identical configs.
inline RunResult run_scenario(const ScenarioConfig& cfg) {
  validate_config(cfg);
  std::filesystem::path csv = detail::resolve_output(cfg.output);
  std::FILE* fp = std::fopen(csv.string().c_str(), "w");
  if (!fp) throw ConfigError("cannot open output file: " + csv.string());
  std::fprintf(fp,
               "step,time,mass,energy,total_vorticity,enstrophy,"
               "balance_residual\n");

  RunResult res;
  res.csv_path = csv;
  nlohmann::json meta;
  std::vector<std::pair<std::string, Eigen::VectorXd>> fields;

  try {
    if (cfg.model == "wave1d") {
      auto mesh = std::make_shared<Mesh1D>(build_interval_mesh(cfg.lx, cfg.nx));
      Wave1DSystem sys(mesh, cfg.degree, cfg.solver_tol, cfg.picard_tol);
      Wave1DState s = wave1d_initial(sys, cfg);
      auto record = [&](int step) {
        DiagnosticRecord r;
        r.step = step;
        r.time = s.t;
        r.mass = sys.mass(s);
        r.energy = sys.energy(s);
        if (!r.finite())
          throw StateInvalid("diagnostics became non-finite at step " +
                             std::to_string(step));
        detail::write_record(fp, r);
      };
      record(0);
      for (int k = 1; k <= cfg.n_steps; ++k) {
        s = sys.step(s, cfg.dt);
        record(k);
      }
      res.final_time = s.t;
      fields.emplace_back("u/" + detail::space_label(sys.V0()), s.u.coeffs);
      fields.emplace_back("h/" + detail::space_label(sys.V1()), s.h.coeffs);
      meta["spaces"] = {{"u", detail::space_label(sys.V0())},
                       {"h", detail::space_label(sys.V1())}};
      meta["dims"] = {{"u", sys.V0().dim()}, {"h", sys.V1().dim()}};
    } else {
      auto mesh = std::make_shared<Mesh2D>(
          build_periodic_quad_mesh(cfg.lx, cfg.ly, cfg.nx, cfg.ny));
      SWEParams prm{cfg.f, cfg.g, cfg.H, cfg.apvm_tau};
      SWESolver sys(mesh, cfg.degree, prm, cfg.solver_tol, cfg.picard_tol);
      SWEState s = swe_initial(sys, cfg);
      const bool linear = cfg.model == "swe-linear";
      auto record = [&](int step) {
        // The linear model evolves the depth perturbation; diagnostics use
        // the full layer depth so the conserved integrals are comparable.
        SWEState full = s;
        if (linear) full.h.coeffs.array() += cfg.H;
        FEFunction q = sys.diagnose_q(full.u, full.h);
        DiagnosticRecord r = conserved_quantities(sys, full, q);
        r.step = step;
        r.time = s.t;
        r.balance_residual = sys.balance_residual(s);
        if (!r.finite())
          throw StateInvalid("diagnostics became non-finite at step " +
                             std::to_string(step));
        detail::write_record(fp, r);
      };
      record(0);
      for (int k = 1; k <= cfg.n_steps; ++k) {
        s = linear ? sys.step_linear(s, cfg.dt)
                   : sys.step_nonlinear(s, cfg.dt, cfg.n_iter);
        record(k);
      }
      res.final_time = s.t;
      fields.emplace_back("u/" + detail::space_label(sys.V1()), s.u.coeffs);
      fields.emplace_back("h/" + detail::space_label(sys.V2()), s.h.coeffs);
      meta["spaces"] = {{"u", detail::space_label(sys.V1())},
                       {"h", detail::space_label(sys.V2())}};
      meta["dims"] = {{"u", sys.V1().dim()}, {"h", sys.V2().dim()}};
    }
  } catch (...) {
    std::fclose(fp);
    throw;
  }
  std::fclose(fp);
  res.rows = cfg.n_steps + 1;

  if (!cfg.field_output.empty()) {
    std::filesystem::path fpath = detail::resolve_output(cfg.field_output);
    std::FILE* ff = std::fopen(fpath.string().c_str(), "w");
    if (!ff) throw ConfigError("cannot open field output: " + fpath.string());
    std::fprintf(ff, "entity_kind,dof_index,value\n");
    for (const auto& [kind, coeffs] : fields)
      detail::dump_field_csv(ff, kind, coeffs);
    std::fclose(ff);

    meta["model"] = cfg.model;
    meta["mesh"] = {{"nx", cfg.nx},
                    {"ny", cfg.model == "wave1d" ? 1 : cfg.ny},
                    {"lx", cfg.lx},
                    {"ly", cfg.model == "wave1d" ? 0.0 : cfg.ly}};
    meta["degree"] = cfg.degree;
    meta["time"] = res.final_time;
    std::ofstream side(fpath.string() + ".json");
    side << meta.dump(2) << "\n";
  }
  return res;
}

struct ConvergenceRow {
  int n = 0;          // elements per direction
  double error = 0.0; // final-time L2 error of the selected field
  double order = 0.0; // log2(e_prev / e) against the previous level, 0 for the first
};

namespace detail {

inline double wave1d_l2_error(const Wave1DSystem& sys, const Wave1DState& s,
                              const ScenarioConfig& cfg, const std::string& field,
                              double t) {
  const double k = 2.0 * std::numbers::pi / cfg.lx;
  const double A = cfg.amplitude;
  std::function<double(double)> ref;
  if (cfg.preset == "travelling-wave") {
    ref = [=](double x) { return A * std::cos(k * (x - t)); };
  } else {  // standing-wave: h = A cos(kx) cos(kt), u = A sin(kx) sin(kt)
    if (field == "h")
      ref = [=](double x) { return A * std::cos(k * x) * std::cos(k * t); };
    else
      ref = [=](double x) { return A * std::sin(k * x) * std::sin(k * t); };
  }
  const FunctionSpace& V = field == "u" ? sys.V0() : sys.V1();
  const FEFunction& fe = field == "u" ? s.u : s.h;
  FieldSampler sampler(V);
  std::vector<double> vals;
  double err2 = integrate(
      V,
      [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
          std::vector<double>& out) {
        vals.resize(xs.size());
        sampler.scalar(fe, e, xs, ys, vals);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          double d = vals[i] - ref(xs[i]);
          out[i] = d * d;
        }
      },
      2 * V.max_degree() + 6);
  return std::sqrt(err2);
}

inline double swe_h_l2_error(const SWESolver& sys, const SWEState& s,
                             const ScenarioConfig& cfg, double t) {
  const double k = 2.0 * std::numbers::pi / cfg.lx;
  const double A = cfg.amplitude;
  const double c = std::sqrt(cfg.g * cfg.H);
  FieldSampler sampler(sys.V2());
  std::vector<double> vals;
  double err2 = integrate(
      sys.V2(),
      [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
          std::vector<double>& out) {
        vals.resize(xs.size());
        sampler.scalar(s.h, e, xs, ys, vals);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          double d = vals[i] - A * std::cos(k * (xs[i] - c * t));
          out[i] = d * d;
        }
      },
      2 * sys.V2().max_degree() + 6);
  return std::sqrt(err2);
}

}  // namespace detail

// Refinement study at fixed final time T = base.dt * base.n_steps: each level
// scales dt by n0/n so dt is proportional to the mesh spacing, runs to T and
// measures the final-time L2 error of `field` ("u" or "h") against the
// preset's analytic solution.  Supported: wave1d standing-/travelling-wave
// (u or h) and swe-linear gravity-wave (h).
inline std::vector<ConvergenceRow> convergence_study(
    const ScenarioConfig& base, const std::vector<int>& mesh_sizes,
    const std::string& field = "u") {
  if (mesh_sizes.size() < 3)
    throw std::invalid_argument("convergence_study: need at least 3 mesh levels");
  validate_config(base);
  if (field != "u" && field != "h")
    throw std::invalid_argument("convergence_study: field must be 'u' or 'h'");
  if (base.model == "swe-nonlinear")
    throw std::invalid_argument(
        "convergence_study: no analytic reference for swe-nonlinear");
  if (base.model == "swe-linear" &&
      (base.preset != "gravity-wave" || field != "h"))
    throw std::invalid_argument(
        "convergence_study: swe-linear supports the gravity-wave preset, field h");

  std::vector<ConvergenceRow> rows;
  const int n0 = mesh_sizes.front();
  for (std::size_t lev = 0; lev < mesh_sizes.size(); ++lev) {
    const int n = mesh_sizes[lev];
    ScenarioConfig cfg = base;
    cfg.nx = n;
    cfg.ny = n;
    cfg.dt = base.dt * n0 / n;
    cfg.n_steps = base.n_steps * n / n0;

    ConvergenceRow row;
    row.n = n;
    if (cfg.model == "wave1d") {
      auto mesh = std::make_shared<Mesh1D>(build_interval_mesh(cfg.lx, cfg.nx));
      Wave1DSystem sys(mesh, cfg.degree, cfg.solver_tol, cfg.picard_tol);
      Wave1DState s = wave1d_initial(sys, cfg);
      for (int k = 0; k < cfg.n_steps; ++k) s = sys.step(s, cfg.dt);
      row.error = detail::wave1d_l2_error(sys, s, cfg, field, s.t);
    } else {
      auto mesh = std::make_shared<Mesh2D>(
          build_periodic_quad_mesh(cfg.lx, cfg.ly, cfg.nx, cfg.ny));
      SWEParams prm{cfg.f, cfg.g, cfg.H, cfg.apvm_tau};
      SWESolver sys(mesh, cfg.degree, prm, cfg.solver_tol, cfg.picard_tol);
      SWEState s = swe_initial(sys, cfg);
      for (int k = 0; k < cfg.n_steps; ++k) s = sys.step_linear(s, cfg.dt);
      row.error = detail::swe_h_l2_error(sys, s, cfg, s.t);
    }
    if (!rows.empty() && row.error > 0.0)
      row.order = std::log2(rows.back().error / row.error);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace perifem
