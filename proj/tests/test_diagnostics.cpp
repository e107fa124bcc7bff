#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <numeric>

#include "perifem/diagnostics.hpp"
#include "test_util.hpp"

using namespace perifem;
using testutil::random_vector;

namespace {
constexpr double pi = std::numbers::pi;

std::shared_ptr<Mesh2D> square(int n) {
  return std::make_shared<Mesh2D>(build_periodic_quad_mesh(1.0, 1.0, n, n));
}

SWEState smooth_state(SWESolver& sys) {
  FEFunction psi = interpolate(sys.V0(), [](double x, double y) {
    return 0.11 * std::sin(2 * pi * x) * std::sin(2 * pi * y) +
           0.05 * std::cos(2 * pi * x);
  });
  SWEState s = sys.zero_state();
  s.u.coeffs = sys.G().apply(psi.coeffs);
  s.u.coeffs += 0.03 * random_vector(s.u.coeffs.size(), 7).matrix();
  s.h = interpolate(sys.V2(), [](double x, double y) {
    return 1.4 + 0.2 * std::cos(2 * pi * y) + 0.1 * std::sin(2 * pi * (x + y));
  });
  return s;
}
} // namespace

TEST_CASE("conserved quantities of a uniform state are the closed forms",
          "[diagnostics]") {
  SWEParams prm{.f = 1.3, .g = 2.0, .H = 2.5};
  SWESolver sys(square(8), 1, prm);
  SWEState s = sys.zero_state();
  s.h.coeffs.setConstant(prm.H);
  FEFunction q = sys.diagnose_q(s.u, s.h);
  DiagnosticRecord rec = conserved_quantities(sys, s, q);
  REQUIRE(rec.mass == Catch::Approx(prm.H).margin(1e-13));
  REQUIRE(rec.energy == Catch::Approx(0.5 * prm.g * prm.H * prm.H).margin(1e-13));
  REQUIRE(rec.total_vorticity == Catch::Approx(prm.f).margin(1e-13));
  REQUIRE(rec.enstrophy == Catch::Approx(prm.f * prm.f / prm.H).margin(1e-13));
  REQUIRE(rec.balance_residual == 0.0);
  REQUIRE(rec.finite());
}

TEST_CASE("doubling the depth doubles the mass exactly", "[diagnostics]") {
  SWEParams prm{.f = 1.0, .g = 1.0, .H = 1.0};
  SWESolver sys(square(6), 2, prm);
  SWEState s = sys.zero_state();
  s.h = interpolate(sys.V2(), [](double x, double y) {
    return 1.0 + 0.3 * std::cos(2 * pi * x) * std::sin(2 * pi * y);
  });
  FEFunction q = sys.diagnose_q(s.u, s.h);
  double m1 = conserved_quantities(sys, s, q).mass;
  s.h.coeffs *= 2.0;
  double m2 = conserved_quantities(sys, s, q).mass;
  REQUIRE(m2 == 2.0 * m1);
}

TEST_CASE("conserved quantities are invariant under quadrature refinement",
          "[diagnostics]") {
  for (int p : {1, 2}) {
    SWEParams prm{.f = 0.8, .g = 1.5, .H = 1.4};
    SWESolver sys(square(6), p, prm);
    SWEState s = smooth_state(sys);
    FEFunction q = sys.diagnose_q(s.u, s.h);
    DiagnosticRecord a = conserved_quantities(sys, s, q);
    DiagnosticRecord b = conserved_quantities(sys, s, q, {}, 8);
    REQUIRE(a.mass == Catch::Approx(b.mass).margin(1e-13));
    REQUIRE(a.energy == Catch::Approx(b.energy).margin(1e-13));
    REQUIRE(a.total_vorticity == Catch::Approx(b.total_vorticity).margin(1e-13));
    REQUIRE(a.enstrophy == Catch::Approx(b.enstrophy).margin(1e-13));
  }
}

TEST_CASE("conserved quantities are additive over element subsets",
          "[diagnostics]") {
  SWEParams prm{.f = 1.0, .g = 1.0, .H = 1.0};
  SWESolver sys(square(6), 1, prm);
  SWEState s = smooth_state(sys);
  FEFunction q = sys.diagnose_q(s.u, s.h);
  int ne = sys.V2().n_elements();
  std::vector<int> left, right;
  for (int e = 0; e < ne; ++e) (e % 3 == 0 ? left : right).push_back(e);
  DiagnosticRecord full = conserved_quantities(sys, s, q);
  DiagnosticRecord a = conserved_quantities(sys, s, q, left);
  DiagnosticRecord b = conserved_quantities(sys, s, q, right);
  REQUIRE(a.mass + b.mass == Catch::Approx(full.mass).margin(1e-13));
  REQUIRE(a.energy + b.energy == Catch::Approx(full.energy).margin(1e-13));
  REQUIRE(a.total_vorticity + b.total_vorticity ==
          Catch::Approx(full.total_vorticity).margin(1e-13));
  REQUIRE(a.enstrophy + b.enstrophy ==
          Catch::Approx(full.enstrophy).margin(1e-13));
}

TEST_CASE("record finiteness check detects bad entries", "[diagnostics]") {
  DiagnosticRecord rec;
  REQUIRE(rec.finite());
  rec.enstrophy = std::nan("");
  REQUIRE_FALSE(rec.finite());
}

TEST_CASE("balance residual wrapper agrees with the solver", "[diagnostics]") {
  SWEParams prm{.f = 2.0, .g = 1.5, .H = 1.0};
  SWESolver sys(square(8), 1, prm, 1e-14);
  FEFunction psi = interpolate(sys.V0(), [](double x, double y) {
    return 0.1 * std::sin(2 * pi * x) * std::cos(2 * pi * y);
  });
  SWEState s = sys.geostrophic_init(psi);
  REQUIRE(balance_residual(sys, s) == sys.balance_residual(s));
  REQUIRE(balance_residual(sys, s) <= 1e-10);
}

TEST_CASE("compatible 1D pairs have inf-sup constant one on every mesh",
          "[diagnostics]") {
  for (int p : {1, 2, 3})
    for (int ne : {8, 16, 32}) {
      Mesh1D mesh = build_interval_mesh(1.0, ne);
      REQUIRE(infsup_constant_1d(mesh, p) == Catch::Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("colocated 1D pair has a vanishing inf-sup constant", "[diagnostics]") {
  Mesh1D mesh = build_interval_mesh(1.0, 16);
  REQUIRE(infsup_constant_1d(mesh, 1, true) <= 1e-10);
  REQUIRE(infsup_constant_1d(mesh, 2, true) <= 1e-10);
}

TEST_CASE("2D divergence pairing has inf-sup constant one", "[diagnostics]") {
  for (int p : {1, 2}) {
    Mesh2D mesh = build_periodic_quad_mesh(1.0, 1.0, 8, 8);
    REQUIRE(infsup_constant_2d(mesh, p) == Catch::Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("inf-sup respects the dense cap", "[diagnostics]") {
  Mesh1D mesh = build_interval_mesh(1.0, 16);
  REQUIRE_THROWS_AS(infsup_constant_1d(mesh, 1, false, 8), TooLarge);
  Mesh2D mesh2 = build_periodic_quad_mesh(1.0, 1.0, 8, 8);
  REQUIRE_THROWS_AS(infsup_constant_2d(mesh2, 1, 8), TooLarge);
}

TEST_CASE("compatible dispersion spectrum has exactly one zero frequency",
          "[diagnostics]") {
  for (int ne : {4, 8, 16, 32, 64}) {
    auto res = dispersion_spectrum_1d(build_interval_mesh(1.0, ne), 1);
    INFO("Ne = " << ne);
    REQUIRE(res.zero_count == 1);
    REQUIRE(std::is_sorted(res.omega.begin(), res.omega.end()));
    for (std::size_t i = 1; i < res.omega.size(); ++i)
      REQUIRE(res.omega[i] > 0.0);
  }
}

TEST_CASE("colocated dispersion spectrum carries spurious zero modes",
          "[diagnostics]") {
  auto res = dispersion_spectrum_1d(build_interval_mesh(1.0, 16), 1, true);
  REQUIRE(res.label == "CG1/CG1");
  REQUIRE(res.zero_count >= 2);
}

TEST_CASE("lowest nonzero frequency approximates the exact wavenumber",
          "[diagnostics]") {
  const int ne = 16;
  auto res = dispersion_spectrum_1d(build_interval_mesh(1.0, ne), 1);
  double exact = 2.0 * pi;
  double rel = std::abs(res.omega[1] - exact) / exact;
  REQUIRE(rel <= std::pow(2.0 * pi / ne, 2));
}

TEST_CASE("dispersion frequencies scale linearly with the wave speed",
          "[diagnostics]") {
  auto a = dispersion_spectrum_1d(build_interval_mesh(1.0, 8), 2);
  auto b = dispersion_spectrum_1d(build_interval_mesh(1.0, 8), 2, false, 3.0);
  REQUIRE(a.label == "CG2/DG1");
  REQUIRE(a.omega.size() == b.omega.size());
  for (std::size_t i = 0; i < a.omega.size(); ++i)
    REQUIRE(b.omega[i] == Catch::Approx(3.0 * a.omega[i]).margin(1e-12));
  REQUIRE_THROWS_AS(dispersion_spectrum_1d(build_interval_mesh(1.0, 4096), 1),
                    TooLarge);
}

TEST_CASE("DoF ratio audit returns exact reduced fractions", "[diagnostics]") {
  Mesh2D mesh = build_periodic_quad_mesh(1.0, 1.0, 4, 4);
  Mesh2D other = build_periodic_quad_mesh(1.0, 1.0, 6, 3);
  auto rt0 = make_space(mesh, Family::RT, 0);
  auto rt1 = make_space(mesh, Family::RT, 1);
  auto dg0 = make_space(mesh, Family::DG, 0);
  auto dg1 = make_space(mesh, Family::DG, 1);
  REQUIRE(dof_ratio_audit(rt0, dg0) == Rational{2, 1});
  REQUIRE(dof_ratio_audit(rt1, dg1) == Rational{2, 1});
  REQUIRE(dof_ratio_audit(rt0, dg1) == Rational{1, 2});
  REQUIRE(dof_ratio_audit(rt0, dg0).value() == 2.0);
  auto rt0b = make_space(other, Family::RT, 0);
  auto dg0b = make_space(other, Family::DG, 0);
  REQUIRE(dof_ratio_audit(rt0b, dg0b) == Rational{2, 1});
  REQUIRE_THROWS_AS(dof_ratio_audit(rt0, dg0b), std::invalid_argument);
}
