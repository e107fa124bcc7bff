#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "perifem/assembly.hpp"
#include "perifem/errors.hpp"
#include "perifem/linalg.hpp"
#include "perifem/mesh.hpp"
#include "perifem/space.hpp"
#include "perifem/sparse.hpp"

namespace perifem {

struct SWEParams {
  double f = 0.0;        // Coriolis parameter (constant)
  double g = 1.0;        // gravity
  double H = 1.0;        // mean depth
  double apvm_tau = 0.0; // PV-stabilisation time scale, 0 disables
};

inline void validate(const SWEParams& p) {
  if (!(p.g > 0.0)) throw std::invalid_argument("SWEParams: g must be positive");
  if (!(p.H > 0.0)) throw std::invalid_argument("SWEParams: H must be positive");
  if (!(p.apvm_tau >= 0.0))
    throw std::invalid_argument("SWEParams: apvm_tau must be non-negative");
}

struct SWEState {
  FEFunction u; // velocity in the vector-valued space
  FEFunction h; // depth in the fully discontinuous space
  double t = 0.0;
};

struct Wave1DState {
  FEFunction u; // continuous space
  FEFunction h; // discontinuous space
  double t = 0.0;
};

namespace detail {

// Evaluates finite element fields at the points handed to a load callback.
// The reference coordinates are recovered once (they are identical for every
// element on these meshes) and the tabulation is cached.
struct FieldSampler {
  const FunctionSpace* V = nullptr;
  std::optional<BasisTable> table;
  std::vector<double> ref_x_, ref_y_;

  explicit FieldSampler(const FunctionSpace& space) : V(&space) {}

  // The reference points recovered from successive elements of one quadrature
  // rule agree to round-off, so the tabulation is reused until the caller
  // switches to a genuinely different point set.
  const BasisTable& get(int e, const std::vector<double>& xs,
                        const std::vector<double>& ys) {
    ElemGeom g = V->elem_geom(e);
    std::vector<double> rx(xs.size()), ry(xs.size(), 0.0);
    for (std::size_t q = 0; q < xs.size(); ++q) {
      rx[q] = (xs[q] - g.x0) / g.hx;
      if (V->spatial_dim() == 2) ry[q] = (ys[q] - g.y0) / g.hy;
    }
    auto near = [](const std::vector<double>& a, const std::vector<double>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-12) return false;
      return true;
    };
    if (!table || !near(rx, ref_x_) || !near(ry, ref_y_)) {
      table = V->tabulate(rx, ry);
      ref_x_ = std::move(rx);
      ref_y_ = std::move(ry);
    }
    return *table;
  }

  void scalar(const FEFunction& f, int e, const std::vector<double>& xs,
              const std::vector<double>& ys, std::vector<double>& out) {
    const BasisTable& t = get(e, xs, ys);
    const int* idx = V->dof_indices(e);
    for (int q = 0; q < t.npts; ++q) {
      double acc = 0.0;
      for (int l = 0; l < t.ndof; ++l)
        acc += f.coeffs[idx[l]] * t.val[q * t.ndof + l];
      out[q] = acc;
    }
  }

  void gradient(const FEFunction& f, int e, const std::vector<double>& xs,
                const std::vector<double>& ys, std::vector<double>& gx,
                std::vector<double>& gy) {
    const BasisTable& t = get(e, xs, ys);
    ElemGeom g = V->elem_geom(e);
    const int* idx = V->dof_indices(e);
    for (int q = 0; q < t.npts; ++q) {
      double ax = 0.0, ay = 0.0;
      for (int l = 0; l < t.ndof; ++l) {
        double c = f.coeffs[idx[l]];
        ax += c * t.dx[q * t.ndof + l];
        ay += c * t.dy[q * t.ndof + l];
      }
      gx[q] = ax / g.hx;
      gy[q] = ay / g.hy;
    }
  }

  void vector(const FEFunction& f, int e, const std::vector<double>& xs,
              const std::vector<double>& ys, std::vector<double>& ux,
              std::vector<double>& uy) {
    const BasisTable& t = get(e, xs, ys);
    ElemGeom g = V->elem_geom(e);
    const int* idx = V->dof_indices(e);
    const std::int8_t* sg = V->dof_signs(e);
    for (int q = 0; q < t.npts; ++q) {
      double ax = 0.0, ay = 0.0;
      for (int l = 0; l < t.ndof; ++l) {
        double c = sg[l] * f.coeffs[idx[l]];
        ax += c * t.vx[q * t.ndof + l];
        ay += c * t.vy[q * t.ndof + l];
      }
      ux[q] = ax / g.hy; // Piola map
      uy[q] = ay / g.hx;
    }
  }
};

} // namespace detail

// ---- 1D wave equation ----------------------------------------------------
//
// u in the continuous space V0, h in the discontinuous space V1, with the
// derivative pairing D_ij = integral w_i' phi_j:
//   M0 du/dt = D h,   M1 dh/dt = -D^T u.
// One step is implicit midpoint, solved by fixed-point iteration (the system
// is linear, so the iteration converges whenever dt * omega_max / 2 < 1).
class Wave1DSystem {
 public:
  Wave1DSystem(std::shared_ptr<Mesh1D> mesh, int degree,
               double solver_tol = 1e-12, double picard_tol = 1e-13)
      : mesh_(std::move(mesh)),
        V0_(make_space(*mesh_, Family::CG, degree)),
        V1_(make_space(*mesh_, Family::DG, degree - 1)),
        M0_(assemble_mass(V0_)),
        M1_(assemble_mass(V1_)),
        D_(assemble_grad_1d(V0_, V1_)),
        m1_solver_(V1_, M1_),
        tol_(solver_tol),
        picard_tol_(picard_tol) {}

  const FunctionSpace& V0() const { return V0_; }
  const FunctionSpace& V1() const { return V1_; }
  const SparseMatrix& M0() const { return M0_; }
  const SparseMatrix& M1() const { return M1_; }
  const SparseMatrix& D() const { return D_; }

  Wave1DState zero_state() const {
    return {FEFunction(V0_, Eigen::VectorXd::Zero(V0_.dim())),
            FEFunction(V1_, Eigen::VectorXd::Zero(V1_.dim())), 0.0};
  }

  Wave1DState step(const Wave1DState& s, double dt) const {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    const Eigen::VectorXd& u0 = s.u.coeffs;
    const Eigen::VectorXd& h0 = s.h.coeffs;
    Eigen::VectorXd up = u0, hp = h0;
    const int max_picard = 1000;
    for (int it = 0; it < max_picard; ++it) {
      Eigen::VectorXd um = 0.5 * (u0 + up);
      Eigen::VectorXd hm = 0.5 * (h0 + hp);
      Eigen::VectorXd un = u0 + dt * cg_solve(M0_, D_.apply(hm), tol_).x;
      Eigen::VectorXd hn = h0 - dt * m1_solver_.solve(D_.apply_transpose(um));
      double du = (un - up).lpNorm<Eigen::Infinity>();
      double dh = (hn - hp).lpNorm<Eigen::Infinity>();
      up = un;
      hp = hn;
      double scale = 1.0 + up.lpNorm<Eigen::Infinity>() + hp.lpNorm<Eigen::Infinity>();
      if (du + dh <= picard_tol_ * scale)
        return {FEFunction(V0_, std::move(up)), FEFunction(V1_, std::move(hp)),
                s.t + dt};
      if (!std::isfinite(du + dh) || du + dh > 1e12 * scale)
        break;
    }
    throw SolverFailure("step: midpoint fixed-point iteration did not converge "
                        "(dt too large for this mesh?)",
                        SolveReport{max_picard, 0.0, false});
  }

  // 0.5 (u' M0 u + h' M1 h), the conserved quadratic invariant.
  double energy(const Wave1DState& s) const {
    return 0.5 * (s.u.coeffs.dot(M0_.apply(s.u.coeffs)) +
                  s.h.coeffs.dot(M1_.apply(s.h.coeffs)));
  }

  double mass(const Wave1DState& s) const {
    return M1_.apply(s.h.coeffs).sum();
  }

 private:
  std::shared_ptr<Mesh1D> mesh_;
  FunctionSpace V0_, V1_;
  SparseMatrix M0_, M1_, D_;
  BlockDiagSolver m1_solver_;
  double tol_, picard_tol_;
};

// ---- rotating shallow water on the doubly periodic plane -----------------
//
// Compatible triple: psi/q in CG(p), u in RT(p-1), h in DG(p-1). Matrices:
//   M0, M1, M2   mass matrices of the three spaces
//   B            divergence pairing, B_ij = integral phi_i div w_j
//   G            exact perp-gradient embedding CG(p) -> RT(p-1)
//   W            vorticity pairing, W_ij = integral perpgrad(gamma_i) . w_j
//   C(q)         skew pairing, C_ij = integral q w_i . perp(w_j)
// Linear dynamics:   M1 du/dt + C(f) u - g B^T h = 0,  M2 dh/dt + H B u = 0.
// Nonlinear dynamics (vector-invariant form), stepped by implicit midpoint
// with a fixed number of Picard sweeps:
//   M1 du/dt + C(qt) F - B^T (g h + P2(|u|^2/2)) = 0,  M2 dh/dt + B F = 0
// with F the projected mass flux, q the diagnosed potential vorticity and qt
// its optionally APVM-stabilised value at quadrature points.
class SWESolver {
 public:
  SWESolver(std::shared_ptr<Mesh2D> mesh, int degree, SWEParams params,
            double solver_tol = 1e-12, double picard_tol = 1e-13)
      : mesh_(std::move(mesh)),
        params_(params),
        V0_(make_space(*mesh_, Family::CG, degree)),
        V1_(make_space(*mesh_, Family::RT, degree - 1)),
        V2_(make_space(*mesh_, Family::DG, degree - 1)),
        M0_(assemble_mass(V0_)),
        M1_(assemble_mass(V1_)),
        M2_(assemble_mass(V2_)),
        B_(assemble_div(V1_, V2_)),
        G_(assemble_perpgrad(V0_, V1_)),
        W_(assemble_vort_rhs(V0_, V1_)),
        Cf_(assemble_perp_mass(V1_, params.f)),
        m2_solver_(V2_, M2_),
        tol_(solver_tol),
        picard_tol_(picard_tol) {
    validate(params_);
  }

  const FunctionSpace& V0() const { return V0_; }
  const FunctionSpace& V1() const { return V1_; }
  const FunctionSpace& V2() const { return V2_; }
  const SWEParams& params() const { return params_; }
  const SparseMatrix& M0() const { return M0_; }
  const SparseMatrix& M1() const { return M1_; }
  const SparseMatrix& M2() const { return M2_; }
  const SparseMatrix& B() const { return B_; }
  const SparseMatrix& G() const { return G_; }
  const SparseMatrix& W() const { return W_; }

  SWEState zero_state() const {
    return {FEFunction(V1_, Eigen::VectorXd::Zero(V1_.dim())),
            FEFunction(V2_, Eigen::VectorXd::Zero(V2_.dim())), 0.0};
  }

  // u = perp-gradient of psi (exact in V1); h solves M2 (g h) = load(f psi),
  // so that the Coriolis and pressure-gradient terms cancel identically.
  SWEState geostrophic_init(const FEFunction& psi) const {
    if (psi.space->dim() != V0_.dim())
      throw std::invalid_argument("geostrophic_init: psi must live in V0");
    Eigen::VectorXd u = G_.apply(psi.coeffs);
    detail::FieldSampler sp(V0_);
    double f = params_.f;
    Eigen::VectorXd load = assemble_load(
        V2_,
        [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
            std::vector<double>& out) {
          sp.scalar(psi, e, xs, ys, out);
          for (double& v : out) v *= f;
        },
        V0_.max_degree());
    Eigen::VectorXd h = m2_solver_.solve(load) / params_.g;
    return {FEFunction(V1_, std::move(u)), FEFunction(V2_, std::move(h)), 0.0};
  }

  SWEState step_linear(const SWEState& s, double dt) const {
    if (!(dt > 0.0)) throw std::invalid_argument("step_linear: dt must be positive");
    const Eigen::VectorXd& u0 = s.u.coeffs;
    const Eigen::VectorXd& h0 = s.h.coeffs;
    Eigen::VectorXd up = u0, hp = h0;
    const int max_picard = 2000;
    for (int it = 0; it < max_picard; ++it) {
      Eigen::VectorXd um = 0.5 * (u0 + up);
      Eigen::VectorXd hm = 0.5 * (h0 + hp);
      Eigen::VectorXd rhs_u =
          params_.g * B_.apply_transpose(hm) - Cf_.apply(um);
      Eigen::VectorXd un = u0 + dt * cg_solve(M1_, rhs_u, tol_).x;
      Eigen::VectorXd hn = h0 - dt * params_.H * m2_solver_.solve(B_.apply(um));
      double du = (un - up).lpNorm<Eigen::Infinity>();
      double dh = (hn - hp).lpNorm<Eigen::Infinity>();
      up = un;
      hp = hn;
      double scale = 1.0 + up.lpNorm<Eigen::Infinity>() + hp.lpNorm<Eigen::Infinity>();
      if (du + dh <= picard_tol_ * scale)
        return {FEFunction(V1_, std::move(up)), FEFunction(V2_, std::move(hp)),
                s.t + dt};
      if (!std::isfinite(du + dh) || du + dh > 1e12 * scale)
        break;
    }
    throw SolverFailure("step_linear: midpoint fixed-point iteration did not "
                        "converge (dt too large for this mesh?)",
                        SolveReport{max_picard, 0.0, false});
  }

  // Potential vorticity q in V0 from integral gamma q h = -integral
  // perpgrad(gamma) . u + integral gamma f  for all gamma in V0.
  FEFunction diagnose_q(const FEFunction& u, const FEFunction& h) const {
    require_positive_depth(h);
    SparseMatrix Mh = assemble_mass(V0_, h);
    Eigen::VectorXd rhs = -W_.apply(u.coeffs) +
                          params_.f * M0_.apply(Eigen::VectorXd::Ones(V0_.dim()));
    return FEFunction(V0_, cg_solve(Mh, rhs, tol_).x);
  }

  // Mass flux F in V1: M1 F = load(h u) with both factors at quadrature points.
  FEFunction compute_F(const FEFunction& u, const FEFunction& h) const {
    detail::FieldSampler su(V1_), sh(V2_);
    std::vector<double> hv;
    int rhs_degree = V1_.max_degree() + V2_.max_degree();
    Eigen::VectorXd load = assemble_load_rt(
        V1_,
        [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
            std::vector<double>& fx, std::vector<double>& fy) {
          hv.resize(xs.size());
          su.vector(u, e, xs, ys, fx, fy);
          sh.scalar(h, e, xs, ys, hv);
          for (std::size_t q = 0; q < xs.size(); ++q) {
            fx[q] *= hv[q];
            fy[q] *= hv[q];
          }
        },
        rhs_degree);
    return FEFunction(V1_, cg_solve(M1_, load, tol_).x);
  }

  // Stabilised PV at quadrature points: qt = q - tau (u . grad q), sampled on
  // the rule later used for the skew matrix C(qt). tau = 0 returns q itself.
  QuadratureField apply_apvm(const FEFunction& q, const FEFunction& u,
                             double dt, double tau) const {
    if (!(dt > 0.0)) throw std::invalid_argument("apply_apvm: dt must be positive");
    if (!(tau >= 0.0)) throw std::invalid_argument("apply_apvm: tau must be >= 0");
    int n1 = points_for_degree(2 * V1_.max_degree() + 2 * V0_.max_degree());
    QuadratureRule2D rule = tensor_rule(n1);
    QuadratureField out;
    out.n1 = n1;
    out.npts_per_elem = rule.size();
    out.vals.resize(static_cast<std::size_t>(V0_.n_elements()) * rule.size());
    BasisTable t0 = V0_.tabulate(rule.x, rule.y);
    BasisTable t1 = V1_.tabulate(rule.x, rule.y);
    for (int e = 0; e < V0_.n_elements(); ++e) {
      ElemGeom g = V0_.elem_geom(e);
      const int* i0 = V0_.dof_indices(e);
      const int* i1 = V1_.dof_indices(e);
      const std::int8_t* sg = V1_.dof_signs(e);
      for (int p = 0; p < rule.size(); ++p) {
        double qv = 0.0, qx = 0.0, qy = 0.0;
        for (int l = 0; l < t0.ndof; ++l) {
          double c = q.coeffs[i0[l]];
          qv += c * t0.val[p * t0.ndof + l];
          qx += c * t0.dx[p * t0.ndof + l];
          qy += c * t0.dy[p * t0.ndof + l];
        }
        double val = qv;
        if (tau > 0.0) {
          double ux = 0.0, uy = 0.0;
          for (int l = 0; l < t1.ndof; ++l) {
            double c = sg[l] * u.coeffs[i1[l]];
            ux += c * t1.vx[p * t1.ndof + l];
            uy += c * t1.vy[p * t1.ndof + l];
          }
          ux /= g.hy;
          uy /= g.hx;
          val -= tau * (ux * qx / g.hx + uy * qy / g.hy);
        }
        out.vals[static_cast<std::size_t>(e) * rule.size() + p] = val;
      }
    }
    return out;
  }

  SWEState step_nonlinear(const SWEState& s, double dt, int n_iter = 4) const {
    if (!(dt > 0.0))
      throw std::invalid_argument("step_nonlinear: dt must be positive");
    if (n_iter < 1)
      throw std::invalid_argument("step_nonlinear: n_iter must be >= 1");
    const Eigen::VectorXd& u0 = s.u.coeffs;
    const Eigen::VectorXd& h0 = s.h.coeffs;
    Eigen::VectorXd up = u0, hp = h0;
    for (int sweep = 0; sweep < n_iter; ++sweep) {
      FEFunction um(V1_, 0.5 * (u0 + up));
      FEFunction hm(V2_, 0.5 * (h0 + hp));
      FEFunction q = diagnose_q(um, hm);
      QuadratureField qt = apply_apvm(q, um, dt, params_.apvm_tau);
      SparseMatrix Cq = assemble_perp_mass(V1_, qt);
      FEFunction F = compute_F(um, hm);
      Eigen::VectorXd beta = params_.g * hm.coeffs + kinetic_projection(um);
      Eigen::VectorXd rhs_u = B_.apply_transpose(beta) - Cq.apply(F.coeffs);
      up = u0 + dt * cg_solve(M1_, rhs_u, tol_).x;
      hp = h0 - dt * m2_solver_.solve(B_.apply(F.coeffs));
    }
    return {FEFunction(V1_, std::move(up)), FEFunction(V2_, std::move(hp)),
            s.t + dt};
  }

  // || M1^{-1} (-C(f) u + g B^T h) ||_{M1} over max(||u||_{M1}, ||r||_{M1});
  // zero exactly when the Coriolis and pressure-gradient terms balance.
  double balance_residual(const SWEState& s) const {
    Eigen::VectorXd resid =
        params_.g * B_.apply_transpose(s.h.coeffs) - Cf_.apply(s.u.coeffs);
    Eigen::VectorXd r = cg_solve(M1_, resid, tol_).x;
    double rn = std::sqrt(r.dot(M1_.apply(r)));
    double un = std::sqrt(s.u.coeffs.dot(M1_.apply(s.u.coeffs)));
    double denom = std::max(rn, un);
    return denom == 0.0 ? 0.0 : rn / denom;
  }

  // Residual of the discrete PV conservation law over one step, tested
  // against every V0 basis function:
  //   r_i = integral gamma_i (q h)^+ - (q h)^- / dt - integral grad(gamma_i)
  //         . (F_mid q_mid),
  // normalised by the larger of the two terms (or 1). The first term uses the
  // defining relation of q: integral gamma q h = -integral perpgrad(gamma).u
  // + integral gamma f, so the f-contribution cancels in the difference.
  double pv_consistency_residual(const SWEState& before, const SWEState& after,
                                 double dt, const FEFunction& F_mid,
                                 const FEFunction& q_mid) const {
    if (!(dt > 0.0))
      throw std::invalid_argument("pv_consistency_residual: dt must be positive");
    Eigen::VectorXd t1 =
        -W_.apply(after.u.coeffs - before.u.coeffs) / dt;
    int n1 = points_for_degree(V0_.max_degree() + V1_.max_degree() +
                               V0_.max_degree());
    QuadratureRule2D rule = tensor_rule(n1);
    BasisTable t0 = V0_.tabulate(rule.x, rule.y);
    BasisTable tv = V1_.tabulate(rule.x, rule.y);
    Eigen::VectorXd t2 = Eigen::VectorXd::Zero(V0_.dim());
    for (int e = 0; e < V0_.n_elements(); ++e) {
      ElemGeom g = V0_.elem_geom(e);
      const int* i0 = V0_.dof_indices(e);
      const int* i1 = V1_.dof_indices(e);
      const std::int8_t* sg = V1_.dof_signs(e);
      for (int p = 0; p < rule.size(); ++p) {
        double qv = 0.0, fx = 0.0, fy = 0.0;
        for (int l = 0; l < t0.ndof; ++l)
          qv += q_mid.coeffs[i0[l]] * t0.val[p * t0.ndof + l];
        for (int l = 0; l < tv.ndof; ++l) {
          double c = sg[l] * F_mid.coeffs[i1[l]];
          fx += c * tv.vx[p * tv.ndof + l];
          fy += c * tv.vy[p * tv.ndof + l];
        }
        fx /= g.hy;
        fy /= g.hx;
        double w = rule.weights[p] * g.hx * g.hy * qv;
        for (int l = 0; l < t0.ndof; ++l)
          t2[i0[l]] += w * (t0.dx[p * t0.ndof + l] / g.hx * fx +
                            t0.dy[p * t0.ndof + l] / g.hy * fy);
      }
    }
    double num = (t1 - t2).lpNorm<Eigen::Infinity>();
    double denom = std::max({1.0, t1.lpNorm<Eigen::Infinity>(),
                             t2.lpNorm<Eigen::Infinity>()});
    return num / denom;
  }

  // Projection of |u|^2 / 2 into V2 (the Bernoulli kinetic term).
  Eigen::VectorXd kinetic_projection(const FEFunction& u) const {
    detail::FieldSampler su(V1_);
    std::vector<double> ux, uy;
    Eigen::VectorXd load = assemble_load(
        V2_,
        [&](int e, const std::vector<double>& xs, const std::vector<double>& ys,
            std::vector<double>& out) {
          ux.resize(xs.size());
          uy.resize(xs.size());
          su.vector(u, e, xs, ys, ux, uy);
          for (std::size_t q = 0; q < xs.size(); ++q)
            out[q] = 0.5 * (ux[q] * ux[q] + uy[q] * uy[q]);
        },
        2 * V1_.max_degree());
    return m2_solver_.solve(load);
  }

  const BlockDiagSolver& m2_solver() const { return m2_solver_; }
  double solver_tol() const { return tol_; }

 private:
  void require_positive_depth(const FEFunction& h) const {
    int n1 = points_for_degree(2 * V0_.max_degree() + V2_.max_degree());
    QuadratureRule2D rule = tensor_rule(n1);
    BasisTable t = V2_.tabulate(rule.x, rule.y);
    for (int e = 0; e < V2_.n_elements(); ++e) {
      const int* idx = V2_.dof_indices(e);
      for (int p = 0; p < rule.size(); ++p) {
        double v = 0.0;
        for (int l = 0; l < t.ndof; ++l)
          v += h.coeffs[idx[l]] * t.val[p * t.ndof + l];
        if (!(v > 0.0))
          throw StateInvalid("diagnose_q: depth not positive at a quadrature point");
      }
    }
  }

  std::shared_ptr<Mesh2D> mesh_;
  SWEParams params_;
  FunctionSpace V0_, V1_, V2_;
  SparseMatrix M0_, M1_, M2_, B_, G_, W_, Cf_;
  BlockDiagSolver m2_solver_;
  double tol_, picard_tol_;
};

} // namespace perifem
