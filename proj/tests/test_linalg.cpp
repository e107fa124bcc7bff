#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "perifem/assembly.hpp"
#include "perifem/linalg.hpp"
#include "perifem/mesh.hpp"
#include "perifem/space.hpp"
#include "test_util.hpp"

using namespace perifem;
using testutil::random_vector;

TEST_CASE("cg converges in one step on diagonal systems", "[linalg]") {
  SparseBuilder b(5, 5);
  for (int i = 0; i < 5; ++i) b.add(i, i, 2.0 + i);
  SparseMatrix A = b.finalize();
  REQUIRE(A.symmetric);
  Eigen::VectorXd rhs = random_vector(5, 1);
  CGResult res = cg_solve(A, rhs, 1e-13);
  REQUIRE(res.report.iterations == 1);
  for (int i = 0; i < 5; ++i)
    REQUIRE(res.x[i] == Catch::Approx(rhs[i] / (2.0 + i)).margin(1e-13));
}

TEST_CASE("cg matches a dense factorization on mass matrices", "[linalg]") {
  Mesh2D m = build_periodic_quad_mesh(1.0, 1.0, 4, 4);
  for (auto [fam, deg] : {std::pair{Family::CG, 2}, {Family::RT, 1}, {Family::DG, 1}}) {
    FunctionSpace V = make_space(m, fam, deg);
    SparseMatrix M = assemble_mass(V);
    Eigen::VectorXd rhs = random_vector(V.dim(), 7);
    CGResult res = cg_solve(M, rhs, 1e-14);
    Eigen::VectorXd xref = Eigen::FullPivLU<Eigen::MatrixXd>(M.to_dense()).solve(rhs);
    REQUIRE(res.report.converged);
    REQUIRE((res.x - xref).norm() <= 1e-10 * xref.norm());
  }
}

TEST_CASE("cg returns zero immediately for a zero right-hand side", "[linalg]") {
  Mesh1D m = build_interval_mesh(1.0, 8);
  SparseMatrix M = assemble_mass(make_space(m, Family::CG, 1));
  CGResult res = cg_solve(M, Eigen::VectorXd::Zero(8));
  REQUIRE(res.report.iterations == 0);
  REQUIRE(res.x.norm() == 0.0);
}

TEST_CASE("cg error decreases monotonically in the energy norm", "[linalg]") {
  Mesh2D m = build_periodic_quad_mesh(1.0, 1.0, 4, 4);
  FunctionSpace V = make_space(m, Family::CG, 2);
  SparseMatrix M = assemble_mass(V);
  Eigen::MatrixXd Md = M.to_dense();
  Eigen::VectorXd rhs = random_vector(V.dim(), 3);
  Eigen::VectorXd xstar = Eigen::FullPivLU<Eigen::MatrixXd>(Md).solve(rhs);
  std::vector<double> errs;
  auto obs = [&](int, const Eigen::VectorXd& x) {
    Eigen::VectorXd e = x - xstar;
    errs.push_back(std::sqrt(e.dot(Md * e)));
  };
  cg_solve(M, rhs, 1e-13, 0, obs);
  REQUIRE(errs.size() >= 3);
  for (size_t k = 1; k < errs.size(); ++k)
    REQUIRE(errs[k] <= errs[k - 1] * (1.0 + 1e-12) + 1e-15);
}

TEST_CASE("cg rejects unusable matrices", "[linalg]") {
  SparseBuilder b(2, 2);
  b.add(0, 0, 1.0);
  b.add(0, 1, 2.0);
  b.add(1, 0, 3.0);
  b.add(1, 1, 1.0);
  SparseMatrix A = b.finalize();
  REQUIRE_FALSE(A.symmetric);
  REQUIRE_THROWS_AS(cg_solve(A, Eigen::VectorXd::Ones(2)), InvalidMatrix);

  SparseBuilder b2(2, 2);
  b2.add(0, 0, -1.0);
  b2.add(1, 1, 1.0);
  SparseMatrix A2 = b2.finalize();
  REQUIRE_THROWS_AS(cg_solve(A2, Eigen::VectorXd::Ones(2)), InvalidMatrix);
}

TEST_CASE("cg reports failure when the iteration budget is exhausted", "[linalg]") {
  Mesh2D m = build_periodic_quad_mesh(1.0, 1.0, 4, 4);
  SparseMatrix M = assemble_mass(make_space(m, Family::CG, 2));
  try {
    cg_solve(M, random_vector(M.rows, 2), 1e-15, 1);
    FAIL("expected SolverFailure");
  } catch (const SolverFailure& e) {
    REQUIRE(e.report.iterations == 1);
    REQUIRE_FALSE(e.report.converged);
    REQUIRE(e.report.rel_residual > 0.0);
  }
}

TEST_CASE("householder complement spans the orthogonal hyperplane", "[linalg]") {
  Eigen::VectorXd v = random_vector(9, 11);
  Eigen::MatrixXd Z = householder_complement(v);
  REQUIRE(Z.rows() == 9);
  REQUIRE(Z.cols() == 8);
  Eigen::MatrixXd ztz = Z.transpose() * Z;
  REQUIRE((ztz - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-13);
  REQUIRE((v.transpose() * Z).cwiseAbs().maxCoeff() < 1e-13 * v.norm());
}

TEST_CASE("generalized eigensolver handles trivial pencils", "[linalg]") {
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(6, 6);
  EigResult same = smallest_generalized_eigs(I, I, 4);
  for (int i = 0; i < 4; ++i) REQUIRE(same.values[i] == Catch::Approx(1.0).margin(1e-13));
  EigResult zero = smallest_generalized_eigs(Eigen::MatrixXd::Zero(6, 6), I, 3);
  for (int i = 0; i < 3; ++i) REQUIRE(std::abs(zero.values[i]) < 1e-13);
}

TEST_CASE("generalized eigensolver reproduces the periodic Fourier symbol", "[linalg]") {
  const int ne = 8;
  const double h = 1.0 / ne;
  SparseBuilder kb(ne, ne), mb(ne, ne);
  for (int i = 0; i < ne; ++i) {
    kb.add(i, i, 2.0 / h);
    kb.add(i, (i + 1) % ne, -1.0 / h);
    kb.add(i, (i + ne - 1) % ne, -1.0 / h);
    mb.add(i, i, 2.0 * h / 3.0);
    mb.add(i, (i + 1) % ne, h / 6.0);
    mb.add(i, (i + ne - 1) % ne, h / 6.0);
  }
  SparseMatrix K = kb.finalize(), M = mb.finalize();
  Eigen::VectorXd constraint = M.apply(Eigen::VectorXd::Ones(ne));
  EigResult res = smallest_generalized_eigs(K, M, 4, constraint);

  std::vector<double> symbol;
  for (int k = 1; k < ne; ++k) {
    double th = 2.0 * std::numbers::pi * k / ne;
    symbol.push_back(((2.0 - 2.0 * std::cos(th)) / h) / (h * (2.0 + std::cos(th)) / 3.0));
  }
  std::sort(symbol.begin(), symbol.end());
  for (int i = 0; i < 4; ++i)
    REQUIRE(res.values[i] == Catch::Approx(symbol[i]).epsilon(1e-10));
}

TEST_CASE("generalized eigensolver enforces the dense cap", "[linalg]") {
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(10, 10);
  REQUIRE_THROWS_AS(smallest_generalized_eigs(I, I, 2, std::nullopt, 8), TooLarge);
}

TEST_CASE("block-diagonal solver inverts DG mass matrices exactly", "[linalg]") {
  Mesh2D m = build_periodic_quad_mesh(1.0, 2.0, 4, 3);
  FunctionSpace V2 = make_space(m, Family::DG, 1);
  SparseMatrix M = assemble_mass(V2);
  BlockDiagSolver solver(V2, M);
  Eigen::VectorXd rhs = random_vector(V2.dim(), 21);
  Eigen::VectorXd x = solver.solve(rhs);
  REQUIRE((M.apply(x) - rhs).cwiseAbs().maxCoeff() < 1e-13 * rhs.cwiseAbs().maxCoeff());
  FunctionSpace V0 = make_space(m, Family::CG, 1);
  REQUIRE_THROWS_AS(BlockDiagSolver(V0, assemble_mass(V0)), std::invalid_argument);
}
