#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "perifem/assembly.hpp"
#include "perifem/errors.hpp"
#include "perifem/linalg.hpp"
#include "perifem/models.hpp"

namespace perifem {

// Scalar diagnostics of a shallow water state at one time level.
struct DiagnosticRecord {
  int step = 0;
  double time = 0.0;
  double mass = 0.0;             // integral of h
  double energy = 0.0;           // integral of h/2 (|u|^2 + g h)
  double total_vorticity = 0.0;  // integral of q h
  double enstrophy = 0.0;        // integral of q^2 h
  double balance_residual = 0.0;

  bool finite() const {
    return std::isfinite(time) && std::isfinite(mass) && std::isfinite(energy) &&
           std::isfinite(total_vorticity) && std::isfinite(enstrophy) &&
           std::isfinite(balance_residual);
  }
};

// Conserved-quantity integrals of (u, h, q), exact for the polynomial
// integrands. An element subset restricts the integrals to those elements
// (the results are additive across disjoint subsets); extra_degree refines
// the quadrature beyond exactness, which must not change the values.
// The balance_residual field is left at zero; callers that want it filled
// use balance_residual() separately (it involves a linear solve).
inline DiagnosticRecord conserved_quantities(const SWESolver& sys,
                                             const SWEState& state,
                                             const FEFunction& q,
                                             std::span<const int> elements = {},
                                             int extra_degree = 0) {
  const FunctionSpace& V0 = sys.V0();
  const FunctionSpace& V1 = sys.V1();
  const FunctionSpace& V2 = sys.V2();
  detail::FieldSampler su(V1), sh(V2), sq(V0);
  std::vector<double> hv, qv, uy;

  DiagnosticRecord rec;
  rec.time = state.t;
  rec.mass = integrate(
      V2,
      [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
          std::vector<double>& out) { sh.scalar(state.h, e, xs, ys, out); },
      V2.max_degree() + extra_degree, elements);

  double kinetic = integrate(
      V1,
      [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
          std::vector<double>& out) {
        hv.resize(xs.size());
        uy.resize(xs.size());
        su.vector(state.u, e, xs, ys, out, uy);
        sh.scalar(state.h, e, xs, ys, hv);
        for (std::size_t i = 0; i < xs.size(); ++i)
          out[i] = 0.5 * hv[i] * (out[i] * out[i] + uy[i] * uy[i]);
      },
      2 * V1.max_degree() + V2.max_degree() + extra_degree, elements);
  double potential = integrate(
      V2,
      [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
          std::vector<double>& out) {
        sh.scalar(state.h, e, xs, ys, out);
        for (double& v : out) v = 0.5 * sys.params().g * v * v;
      },
      2 * V2.max_degree() + extra_degree, elements);
  rec.energy = kinetic + potential;

  rec.total_vorticity = integrate(
      V0,
      [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
          std::vector<double>& out) {
        hv.resize(xs.size());
        sq.scalar(q, e, xs, ys, out);
        sh.scalar(state.h, e, xs, ys, hv);
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] *= hv[i];
      },
      V0.max_degree() + V2.max_degree() + extra_degree, elements);
  rec.enstrophy = integrate(
      V0,
      [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
          std::vector<double>& out) {
        hv.resize(xs.size());
        sq.scalar(q, e, xs, ys, out);
        sh.scalar(state.h, e, xs, ys, hv);
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = out[i] * out[i] * hv[i];
      },
      2 * V0.max_degree() + V2.max_degree() + extra_degree, elements);
  return rec;
}

inline double balance_residual(const SWESolver& sys, const SWEState& state) {
  return sys.balance_residual(state);
}

namespace detail {

// Smallest singular value of the whitened derivative pairing restricted to
// the mean-zero h subspace:
//   sigma_min( K+^{-1/2} P  L^{-T} Z ),
// where P is the pairing matrix (w rows, h columns), K the Gram matrix of
// the derivative seminorm on the w space, M = L L^T the h mass, and Z an
// orthonormal basis of the complement of the constant (c = L^T 1).  K+ keeps
// either all but the drop_smallest lowest eigenvalues, or (drop_smallest = 0)
// all eigenvalues above rel_threshold * lambda_max.
inline double infsup_sigma(const Eigen::MatrixXd& P, const Eigen::MatrixXd& K,
                           const Eigen::MatrixXd& M,
                           const Eigen::VectorXd& ones_h, int drop_smallest,
                           double rel_threshold) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  if (es.info() != Eigen::Success)
    throw InvalidMatrix("infsup: eigensolve of the derivative Gram failed");
  const Eigen::VectorXd& lam = es.eigenvalues();  // ascending
  int n = static_cast<int>(lam.size());
  double lmax = lam[n - 1];
  if (!(lmax > 0.0))
    throw InvalidMatrix("infsup: derivative Gram has no positive eigenvalue");
  int first = drop_smallest;
  if (drop_smallest == 0)
    while (first < n && lam[first] <= rel_threshold * lmax) ++first;
  if (first >= n) throw InvalidMatrix("infsup: derivative Gram is singular");
  for (int i = 0; i < first; ++i)
    if (lam[i] > 1e-8 * lmax)
      throw InvalidMatrix("infsup: deflated eigenvalue is not numerically zero");

  int kept = n - first;
  Eigen::MatrixXd S0 = es.eigenvectors().rightCols(kept).transpose() * P;
  for (int r = 0; r < kept; ++r) S0.row(r) /= std::sqrt(lam[first + r]);

  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw InvalidMatrix("infsup: h mass matrix is not SPD");
  Eigen::VectorXd c = llt.matrixU() * ones_h;
  Eigen::MatrixXd Z = householder_complement(c);
  Eigen::MatrixXd S = S0 * llt.matrixU().solve(Z);
  if (S.rows() < S.cols()) return 0.0;  // pairing cannot control every h
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
  return svd.singularValues().minCoeff();
}

}  // namespace detail

// Discrete inf-sup constant of the 1D derivative pairing
//   min over mean-zero h of  max over w of  <h, w'> / (|w'| |h|),
// with w in CG(p) and h in DG(p-1) (compatible) or CG(p) (colocated).  The
// derivative Gram is evaluated exactly through an auxiliary DG(p-1) expansion
// of w'; its constant kernel is deflated.
inline double infsup_constant_1d(const Mesh1D& mesh, int degree,
                                 bool colocated = false, int dense_cap = 4096) {
  FunctionSpace Vw = make_space(mesh, Family::CG, degree);
  FunctionSpace Vh = colocated ? make_space(mesh, Family::CG, degree)
                               : make_space(mesh, Family::DG, degree - 1);
  if (Vw.dim() + Vh.dim() > dense_cap)
    throw TooLarge("infsup_constant_1d: problem exceeds dense cap");
  Eigen::MatrixXd P = assemble_grad_1d(Vw, Vh).to_dense();
  FunctionSpace Vaux = make_space(mesh, Family::DG, degree - 1);
  Eigen::MatrixXd A = assemble_grad_1d(Vw, Vaux).to_dense();
  Eigen::MatrixXd Maux = assemble_mass(Vaux).to_dense();
  Eigen::MatrixXd K = A * Maux.llt().solve(A.transpose());
  Eigen::MatrixXd M = assemble_mass(Vh).to_dense();
  Eigen::VectorXd ones = interpolate(Vh, [](double, double) { return 1.0; }).coeffs;
  return detail::infsup_sigma(P, K, M, ones, /*drop_smallest=*/1, 0.0);
}

// 2D analogue for the divergence pairing, w in RT(p-1) and h in DG(p-1).
// The divergence Gram on RT has a large kernel (the divergence-free subspace),
// so it is deflated by a relative eigenvalue threshold instead of a fixed
// kernel dimension.
inline double infsup_constant_2d(const Mesh2D& mesh, int degree,
                                 int dense_cap = 4096) {
  FunctionSpace Vw = make_space(mesh, Family::RT, degree - 1);
  FunctionSpace Vh = make_space(mesh, Family::DG, degree - 1);
  if (Vw.dim() + Vh.dim() > dense_cap)
    throw TooLarge("infsup_constant_2d: problem exceeds dense cap");
  Eigen::MatrixXd B = assemble_div(Vw, Vh).to_dense();  // h rows, w columns
  Eigen::MatrixXd M = assemble_mass(Vh).to_dense();
  Eigen::MatrixXd K = B.transpose() * M.llt().solve(B);
  Eigen::VectorXd ones = interpolate(Vh, [](double, double) { return 1.0; }).coeffs;
  return detail::infsup_sigma(B.transpose(), K, M, ones, /*drop_smallest=*/0,
                              1e-12);
}

// Eigenfrequencies of the 1D linear wave system at unit wave speed, obtained
// as the singular values of L0^{-1} D L1^{-T} with M0 = L0 L0^T, M1 = L1 L1^T.
struct DispersionResult {
  std::string label;
  std::vector<double> omega;  // |omega|, ascending
  int zero_count = 0;         // |omega| <= 1e-8 * max|omega|
};

inline DispersionResult dispersion_spectrum_1d(const Mesh1D& mesh, int degree,
                                               bool colocated = false,
                                               double wave_speed = 1.0,
                                               int dense_cap = 4096) {
  FunctionSpace V0 = make_space(mesh, Family::CG, degree);
  FunctionSpace V1 = colocated ? make_space(mesh, Family::CG, degree)
                               : make_space(mesh, Family::DG, degree - 1);
  if (V0.dim() + V1.dim() > dense_cap)
    throw TooLarge("dispersion_spectrum_1d: problem exceeds dense cap");
  Eigen::MatrixXd D = assemble_grad_1d(V0, V1).to_dense();
  Eigen::LLT<Eigen::MatrixXd> l0(assemble_mass(V0).to_dense());
  Eigen::LLT<Eigen::MatrixXd> l1(assemble_mass(V1).to_dense());
  if (l0.info() != Eigen::Success || l1.info() != Eigen::Success)
    throw InvalidMatrix("dispersion_spectrum_1d: mass matrix not SPD");
  Eigen::MatrixXd X = l0.matrixL().solve(D);
  Eigen::MatrixXd S = l1.matrixL().solve(X.transpose()).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);

  DispersionResult res;
  res.label = "CG" + std::to_string(degree) + "/" +
              (colocated ? "CG" + std::to_string(degree)
                         : "DG" + std::to_string(degree - 1));
  res.omega.assign(svd.singularValues().data(),
                   svd.singularValues().data() + svd.singularValues().size());
  std::reverse(res.omega.begin(), res.omega.end());
  for (double& w : res.omega) w *= wave_speed;
  double wmax = res.omega.empty() ? 0.0 : res.omega.back();
  for (double w : res.omega)
    if (w <= 1e-8 * wmax) ++res.zero_count;
  return res;
}

struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

// dim(V1)/dim(V2) as an exact reduced fraction.
inline Rational dof_ratio_audit(const FunctionSpace& V1, const FunctionSpace& V2) {
  if (V1.mesh2 == nullptr || V1.mesh2 != V2.mesh2)
    throw std::invalid_argument("dof_ratio_audit: spaces must share a 2D mesh");
  long long a = V1.dim(), b = V2.dim();
  long long g = std::gcd(a, b);
  return {a / g, b / g};
}

}  // namespace perifem
