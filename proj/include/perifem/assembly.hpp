#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "perifem/errors.hpp"
#include "perifem/quadrature.hpp"
#include "perifem/space.hpp"
#include "perifem/sparse.hpp"

namespace perifem {

// Scalar values at the volume quadrature points of every element, for a rule
// with n1 points per direction (n1 points total in 1D, n1*n1 in 2D).
struct QuadratureField {
  int n1 = 0;
  int npts_per_elem = 0;
  std::vector<double> vals; // [e * npts_per_elem + q]

  double at(int e, int q) const { return vals[e * npts_per_elem + q]; }
};

namespace detail {

using WeightFn = std::function<void(int /*e*/, std::vector<double>& /*out*/)>;

// Builds a per-element weight evaluator at the given 2D (or 1D) rule points.
inline WeightFn make_weight(const FEFunction* w, double constant,
                            const QuadratureField* qf,
                            const std::vector<double>& qx,
                            const std::vector<double>& qy) {
  int npts = static_cast<int>(qx.size());
  if (qf) {
    if (qf->npts_per_elem != npts)
      throw std::invalid_argument("quadrature field does not match the assembly rule");
    return [qf, npts](int e, std::vector<double>& out) {
      for (int q = 0; q < npts; ++q) out[q] = qf->at(e, q);
    };
  }
  if (w) {
    const FunctionSpace& Vw = *w->space;
    if (Vw.value_rank() != 0)
      throw std::invalid_argument("weight field must be scalar-valued");
    BasisTable t = Vw.tabulate(qx, qy);
    return [w, &Vw, t = std::move(t), npts](int e, std::vector<double>& out) {
      const int* idx = Vw.dof_indices(e);
      for (int q = 0; q < npts; ++q) {
        double acc = 0.0;
        for (int l = 0; l < t.ndof; ++l)
          acc += w->coeffs[idx[l]] * t.val[q * t.ndof + l];
        out[q] = acc;
      }
    };
  }
  return [constant, npts](int, std::vector<double>& out) {
    for (int q = 0; q < npts; ++q) out[q] = constant;
  };
}

inline int weight_degree(const FEFunction* w) {
  return w ? w->space->max_degree() : 0;
}

} // namespace detail

// ---- mass matrices -------------------------------------------------------

inline SparseMatrix assemble_mass_impl(const FunctionSpace& V, const FEFunction* w,
                                       double constant, const QuadratureField* qf,
                                       int extra_points) {
  int d = 2 * V.max_degree() + detail::weight_degree(w);
  int n1 = points_for_degree(d) + extra_points;
  if (qf) n1 = qf->n1;

  SparseBuilder builder(V.dim(), V.dim());
  int nl = V.ndof_local();

  if (V.spatial_dim() == 1) {
    QuadratureRule1D rule = gauss_legendre(n1);
    BasisTable t = V.tabulate(rule.points);
    std::vector<double> wq(rule.size());
    auto weight = detail::make_weight(w, constant, qf, rule.points, {});
    for (int e = 0; e < V.n_elements(); ++e) {
      double h = V.elem_geom(e).hx;
      weight(e, wq);
      const int* idx = V.dof_indices(e);
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j) {
          double acc = 0.0;
          for (int q = 0; q < rule.size(); ++q)
            acc += rule.weights[q] * wq[q] * t.val[q * nl + i] * t.val[q * nl + j];
          builder.add(idx[i], idx[j], acc * h);
        }
    }
    return builder.finalize();
  }

  QuadratureRule2D rule = tensor_rule(n1);
  BasisTable t = V.tabulate(rule.x, rule.y);
  std::vector<double> wq(rule.size());
  auto weight = detail::make_weight(w, constant, qf, rule.x, rule.y);
  bool vec = V.value_rank() == 1;
  for (int e = 0; e < V.n_elements(); ++e) {
    ElemGeom g = V.elem_geom(e);
    weight(e, wq);
    const int* idx = V.dof_indices(e);
    const std::int8_t* sg = V.dof_signs(e);
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) {
        double acc = 0.0;
        if (vec) {
          for (int q = 0; q < rule.size(); ++q)
            acc += rule.weights[q] * wq[q] *
                   (t.vx[q * nl + i] * t.vx[q * nl + j] * (g.hx / g.hy) +
                    t.vy[q * nl + i] * t.vy[q * nl + j] * (g.hy / g.hx));
          builder.add(idx[i], idx[j], sg[i] * sg[j] * acc);
        } else {
          for (int q = 0; q < rule.size(); ++q)
            acc += rule.weights[q] * wq[q] * t.val[q * nl + i] * t.val[q * nl + j];
          builder.add(idx[i], idx[j], acc * g.hx * g.hy);
        }
      }
  }
  return builder.finalize();
}

inline SparseMatrix assemble_mass(const FunctionSpace& V, int extra_points = 0) {
  return assemble_mass_impl(V, nullptr, 1.0, nullptr, extra_points);
}

inline SparseMatrix assemble_mass(const FunctionSpace& V, const FEFunction& weight,
                                  int extra_points = 0) {
  return assemble_mass_impl(V, &weight, 1.0, nullptr, extra_points);
}

inline SparseMatrix assemble_mass(const FunctionSpace& V, const QuadratureField& weight) {
  return assemble_mass_impl(V, nullptr, 1.0, &weight, 0);
}

// ---- 1D derivative pairings ---------------------------------------------

// D~_ij = integral N_i' Ntilde_j over the periodic interval.
inline SparseMatrix assemble_grad_1d(const FunctionSpace& V0, const FunctionSpace& V1,
                                     int extra_points = 0) {
  if (V0.spatial_dim() != 1 || V1.spatial_dim() != 1)
    throw UnsupportedSpace("assemble_grad_1d: 1D spaces required");
  if (V0.mesh1 != V1.mesh1)
    throw std::invalid_argument("assemble_grad_1d: spaces on different meshes");
  int n1 = points_for_degree(V0.max_degree() + V1.max_degree()) + extra_points;
  QuadratureRule1D rule = gauss_legendre(n1);
  BasisTable t0 = V0.tabulate(rule.points);
  BasisTable t1 = V1.tabulate(rule.points);
  SparseBuilder builder(V0.dim(), V1.dim());
  for (int e = 0; e < V0.n_elements(); ++e) {
    const int* i0 = V0.dof_indices(e);
    const int* i1 = V1.dof_indices(e);
    for (int i = 0; i < t0.ndof; ++i)
      for (int j = 0; j < t1.ndof; ++j) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] * t0.dx[q * t0.ndof + i] * t1.val[q * t1.ndof + j];
        builder.add(i0[i], i1[j], acc);
      }
  }
  return builder.finalize();
}

// Colocated variant D_ij = integral N_i N_j' on a single space.
inline SparseMatrix assemble_grad_colocated_1d(const FunctionSpace& V,
                                               int extra_points = 0) {
  if (V.spatial_dim() != 1)
    throw UnsupportedSpace("assemble_grad_colocated_1d: 1D space required");
  int n1 = points_for_degree(2 * V.max_degree()) + extra_points;
  QuadratureRule1D rule = gauss_legendre(n1);
  BasisTable t = V.tabulate(rule.points);
  SparseBuilder builder(V.dim(), V.dim());
  for (int e = 0; e < V.n_elements(); ++e) {
    const int* idx = V.dof_indices(e);
    for (int i = 0; i < t.ndof; ++i)
      for (int j = 0; j < t.ndof; ++j) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] * t.val[q * t.ndof + i] * t.dx[q * t.ndof + j];
        builder.add(idx[i], idx[j], acc);
      }
  }
  return builder.finalize();
}

// ---- 2D operators --------------------------------------------------------

// B_ij = integral phi_i div(w_j), rows in V2, columns in V1.
inline SparseMatrix assemble_div(const FunctionSpace& V1, const FunctionSpace& V2,
                                 int extra_points = 0) {
  if (V1.value_rank() != 1 || V2.value_rank() != 0 || V2.spatial_dim() != 2)
    throw UnsupportedSpace("assemble_div: needs (RT, DG) pair");
  if (V1.mesh2 != V2.mesh2)
    throw std::invalid_argument("assemble_div: spaces on different meshes");
  int n1 = points_for_degree(V1.max_degree() + V2.max_degree()) + extra_points;
  QuadratureRule2D rule = tensor_rule(n1);
  BasisTable t1 = V1.tabulate(rule.x, rule.y);
  BasisTable t2 = V2.tabulate(rule.x, rule.y);
  SparseBuilder builder(V2.dim(), V1.dim());
  for (int e = 0; e < V1.n_elements(); ++e) {
    const int* i1 = V1.dof_indices(e);
    const std::int8_t* s1 = V1.dof_signs(e);
    const int* i2 = V2.dof_indices(e);
    for (int i = 0; i < t2.ndof; ++i)
      for (int j = 0; j < t1.ndof; ++j) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] * t2.val[q * t2.ndof + i] * t1.div[q * t1.ndof + j];
        builder.add(i2[i], i1[j], s1[j] * acc);
      }
  }
  return builder.finalize();
}

// C(q)_ij = integral q (w_i . perp(w_j)) with perp(a) = (-a_y, a_x).
inline SparseMatrix assemble_perp_mass_impl(const FunctionSpace& V1, const FEFunction* w,
                                            double constant, const QuadratureField* qf,
                                            int extra_points) {
  if (V1.value_rank() != 1)
    throw UnsupportedSpace("assemble_perp_mass: RT space required");
  int d = 2 * V1.max_degree() + detail::weight_degree(w);
  int n1 = points_for_degree(d) + extra_points;
  if (qf) n1 = qf->n1;
  QuadratureRule2D rule = tensor_rule(n1);
  BasisTable t = V1.tabulate(rule.x, rule.y);
  std::vector<double> wq(rule.size());
  auto weight = detail::make_weight(w, constant, qf, rule.x, rule.y);
  int nl = V1.ndof_local();
  SparseBuilder builder(V1.dim(), V1.dim());
  for (int e = 0; e < V1.n_elements(); ++e) {
    weight(e, wq);
    const int* idx = V1.dof_indices(e);
    const std::int8_t* sg = V1.dof_signs(e);
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] * wq[q] *
                 (t.vy[q * nl + i] * t.vx[q * nl + j] -
                  t.vx[q * nl + i] * t.vy[q * nl + j]);
        builder.add(idx[i], idx[j], sg[i] * sg[j] * acc);
      }
  }
  return builder.finalize();
}

inline SparseMatrix assemble_perp_mass(const FunctionSpace& V1, double f,
                                       int extra_points = 0) {
  return assemble_perp_mass_impl(V1, nullptr, f, nullptr, extra_points);
}

inline SparseMatrix assemble_perp_mass(const FunctionSpace& V1, const FEFunction& q,
                                       int extra_points = 0) {
  return assemble_perp_mass_impl(V1, &q, 1.0, nullptr, extra_points);
}

inline SparseMatrix assemble_perp_mass(const FunctionSpace& V1, const QuadratureField& q) {
  return assemble_perp_mass_impl(V1, nullptr, 1.0, &q, 0);
}

// W_ij = integral perpgrad(gamma_i) . w_j, rows in V0, columns in V1.
inline SparseMatrix assemble_vort_rhs(const FunctionSpace& V0, const FunctionSpace& V1,
                                      int extra_points = 0) {
  if (V0.spatial_dim() != 2 || V0.value_rank() != 0 || V1.value_rank() != 1)
    throw UnsupportedSpace("assemble_vort_rhs: needs (CG, RT) pair");
  int n1 = points_for_degree(V0.max_degree() + V1.max_degree()) + extra_points;
  QuadratureRule2D rule = tensor_rule(n1);
  BasisTable t0 = V0.tabulate(rule.x, rule.y);
  BasisTable t1 = V1.tabulate(rule.x, rule.y);
  SparseBuilder builder(V0.dim(), V1.dim());
  for (int e = 0; e < V0.n_elements(); ++e) {
    ElemGeom g = V0.elem_geom(e);
    const int* i0 = V0.dof_indices(e);
    const int* i1 = V1.dof_indices(e);
    const std::int8_t* s1 = V1.dof_signs(e);
    for (int i = 0; i < t0.ndof; ++i)
      for (int j = 0; j < t1.ndof; ++j) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] *
                 (-t0.dy[q * t0.ndof + i] * t1.vx[q * t1.ndof + j] * (g.hx / g.hy) +
                  t0.dx[q * t0.ndof + i] * t1.vy[q * t1.ndof + j] * (g.hy / g.hx));
        builder.add(i0[i], i1[j], s1[j] * acc);
      }
  }
  return builder.finalize();
}

// G: exact embedding of perpgrad(psi) = (-psi_y, psi_x) from V0 into V1,
// computed by applying the RT degree-of-freedom functionals to perpgrad of
// each V0 basis function. Entries are set, not accumulated: an edge dof seen
// from both adjacent cells receives the same value because psi and the
// tangential derivative are single-valued on the edge.
inline SparseMatrix assemble_perpgrad(const FunctionSpace& V0, const FunctionSpace& V1) {
  if (V0.spatial_dim() != 2 || V0.value_rank() != 0 || V1.value_rank() != 1)
    throw UnsupportedSpace("assemble_perpgrad: needs (CG, RT) pair");
  if (V1.degree + 1 != V0.degree)
    throw UnsupportedSpace("assemble_perpgrad: CG(p) must pair with RT(p-1)");
  int k = V1.degree;
  int p = V0.degree;
  int per_edge = k + 1;
  int n_int = 2 * k * (k + 1);

  QuadratureRule1D erule = gauss_legendre(p + 2);
  auto legendre = [](int m, double t) { return m == 0 ? 1.0 : 2.0 * t - 1.0; };

  // V0 tables on each reference edge (for tangential-derivative moments)
  int nq = erule.size();
  std::vector<double> zeros(nq, 0.0), ones(nq, 1.0);
  BasisTable t_left = V0.tabulate(zeros, erule.points);
  BasisTable t_right = V0.tabulate(ones, erule.points);
  BasisTable t_bottom = V0.tabulate(erule.points, zeros);
  BasisTable t_top = V0.tabulate(erule.points, ones);

  QuadratureRule2D crule = tensor_rule(p + 2);
  BasisTable t_cell = V0.tabulate(crule.x, crule.y);

  int nl0 = V0.ndof_local();
  SparseBuilder builder(V1.dim(), V0.dim());
  std::vector<double> loc((4 * per_edge + n_int) * nl0);

  for (int e = 0; e < V0.n_elements(); ++e) {
    std::fill(loc.begin(), loc.end(), 0.0);
    // edge moments of perpgrad(psi) . n_outward; on the reference cell these
    // reduce to tangential-derivative moments with no geometric factors
    for (int j = 0; j < nl0; ++j) {
      for (int m = 0; m < per_edge; ++m) {
        double a_left = 0, a_right = 0, a_bottom = 0, a_top = 0;
        for (int q = 0; q < nq; ++q) {
          double w = erule.weights[q] * legendre(m, erule.points[q]);
          a_left += w * t_left.dy[q * nl0 + j];
          a_right -= w * t_right.dy[q * nl0 + j];
          a_bottom -= w * t_bottom.dx[q * nl0 + j];
          a_top += w * t_top.dx[q * nl0 + j];
        }
        loc[(0 * per_edge + m) * nl0 + j] = a_left;
        loc[(1 * per_edge + m) * nl0 + j] = a_right;
        loc[(2 * per_edge + m) * nl0 + j] = a_bottom;
        loc[(3 * per_edge + m) * nl0 + j] = a_top;
      }
      // interior moments (order >= 1)
      for (int m = 0; m <= k && n_int > 0; ++m) {
        double ax = 0, ay = 0;
        for (int q = 0; q < crule.size(); ++q) {
          ax -= crule.weights[q] * t_cell.dy[q * nl0 + j] * std::pow(crule.y[q], m);
          ay += crule.weights[q] * t_cell.dx[q * nl0 + j] * std::pow(crule.x[q], m);
        }
        loc[(4 * per_edge + 0 * (k + 1) + m) * nl0 + j] = ax;
        loc[(4 * per_edge + (k + 1) + m) * nl0 + j] = ay;
      }
    }
    const int* i1 = V1.dof_indices(e);
    const std::int8_t* s1 = V1.dof_signs(e);
    const int* i0 = V0.dof_indices(e);
    for (int l = 0; l < V1.ndof_local(); ++l)
      for (int j = 0; j < nl0; ++j) {
        double v = s1[l] * loc[l * nl0 + j];
        builder.set(i1[l], i0[j], v);
      }
  }
  return builder.finalize();
}

// ---- load vectors --------------------------------------------------------

// Scalar load: out_i = integral basis_i(x) f(x), with f supplied per element
// at the rule points.
using ElemScalarFn = std::function<void(int /*e*/, const std::vector<double>& /*x*/,
                                        const std::vector<double>& /*y*/,
                                        std::vector<double>& /*out*/)>;
using ElemVectorFn = std::function<void(int, const std::vector<double>&,
                                        const std::vector<double>&,
                                        std::vector<double>& /*fx*/,
                                        std::vector<double>& /*fy*/)>;

inline Eigen::VectorXd assemble_load(const FunctionSpace& V, const ElemScalarFn& f,
                                     int rhs_degree, int extra_points = 0) {
  if (V.value_rank() != 0)
    throw std::invalid_argument("assemble_load: scalar space required");
  int n1 = points_for_degree(V.max_degree() + rhs_degree) + extra_points;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(V.dim());
  if (V.spatial_dim() == 1) {
    QuadratureRule1D rule = gauss_legendre(n1);
    BasisTable t = V.tabulate(rule.points);
    std::vector<double> fv(rule.size()), yy(rule.size(), 0.0);
    std::vector<double> xs(rule.size());
    for (int e = 0; e < V.n_elements(); ++e) {
      ElemGeom g = V.elem_geom(e);
      for (int q = 0; q < rule.size(); ++q) xs[q] = g.x0 + rule.points[q] * g.hx;
      f(e, xs, yy, fv);
      const int* idx = V.dof_indices(e);
      for (int i = 0; i < t.ndof; ++i) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] * t.val[q * t.ndof + i] * fv[q];
        out[idx[i]] += acc * g.hx;
      }
    }
    return out;
  }
  QuadratureRule2D rule = tensor_rule(n1);
  BasisTable t = V.tabulate(rule.x, rule.y);
  std::vector<double> fv(rule.size());
  std::vector<double> xs(rule.size()), ys(rule.size());
  for (int e = 0; e < V.n_elements(); ++e) {
    ElemGeom g = V.elem_geom(e);
    for (int q = 0; q < rule.size(); ++q) {
      xs[q] = g.x0 + rule.x[q] * g.hx;
      ys[q] = g.y0 + rule.y[q] * g.hy;
    }
    f(e, xs, ys, fv);
    const int* idx = V.dof_indices(e);
    for (int i = 0; i < t.ndof; ++i) {
      double acc = 0.0;
      for (int q = 0; q < rule.size(); ++q)
        acc += rule.weights[q] * t.val[q * t.ndof + i] * fv[q];
      out[idx[i]] += acc * g.hx * g.hy;
    }
  }
  return out;
}

// RT load: out_i = integral w_i . F.
inline Eigen::VectorXd assemble_load_rt(const FunctionSpace& V1, const ElemVectorFn& f,
                                        int rhs_degree, int extra_points = 0) {
  if (V1.value_rank() != 1)
    throw std::invalid_argument("assemble_load_rt: RT space required");
  int n1 = points_for_degree(V1.max_degree() + rhs_degree) + extra_points;
  QuadratureRule2D rule = tensor_rule(n1);
  BasisTable t = V1.tabulate(rule.x, rule.y);
  std::vector<double> fx(rule.size()), fy(rule.size());
  std::vector<double> xs(rule.size()), ys(rule.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(V1.dim());
  int nl = V1.ndof_local();
  for (int e = 0; e < V1.n_elements(); ++e) {
    ElemGeom g = V1.elem_geom(e);
    for (int q = 0; q < rule.size(); ++q) {
      xs[q] = g.x0 + rule.x[q] * g.hx;
      ys[q] = g.y0 + rule.y[q] * g.hy;
    }
    f(e, xs, ys, fx, fy);
    const int* idx = V1.dof_indices(e);
    const std::int8_t* sg = V1.dof_signs(e);
    for (int i = 0; i < nl; ++i) {
      double acc = 0.0;
      for (int q = 0; q < rule.size(); ++q)
        acc += rule.weights[q] *
               (t.vx[q * nl + i] * fx[q] * g.hx + t.vy[q * nl + i] * fy[q] * g.hy);
      out[idx[i]] += sg[i] * acc;
    }
  }
  return out;
}

// Quadrature of a pointwise integrand over (a subset of) the elements.
inline double integrate(const FunctionSpace& Vref,
                        const std::function<void(int, const std::vector<double>&,
                                                 const std::vector<double>&,
                                                 std::vector<double>&)>& f,
                        int degree, std::span<const int> elements = {}) {
  int n1 = points_for_degree(degree);
  double total = 0.0;
  std::vector<int> all;
  if (elements.empty()) {
    all.resize(Vref.n_elements());
    for (int e = 0; e < Vref.n_elements(); ++e) all[e] = e;
    elements = all;
  }
  if (Vref.spatial_dim() == 1) {
    QuadratureRule1D rule = gauss_legendre(n1);
    std::vector<double> fv(rule.size()), xs(rule.size()), yy(rule.size(), 0.0);
    for (int e : elements) {
      ElemGeom g = Vref.elem_geom(e);
      for (int q = 0; q < rule.size(); ++q) xs[q] = g.x0 + rule.points[q] * g.hx;
      f(e, xs, yy, fv);
      double acc = 0.0;
      for (int q = 0; q < rule.size(); ++q) acc += rule.weights[q] * fv[q];
      total += acc * g.hx;
    }
    return total;
  }
  QuadratureRule2D rule = tensor_rule(n1);
  std::vector<double> fv(rule.size()), xs(rule.size()), ys(rule.size());
  for (int e : elements) {
    ElemGeom g = Vref.elem_geom(e);
    for (int q = 0; q < rule.size(); ++q) {
      xs[q] = g.x0 + rule.x[q] * g.hx;
      ys[q] = g.y0 + rule.y[q] * g.hy;
    }
    f(e, xs, ys, fv);
    double acc = 0.0;
    for (int q = 0; q < rule.size(); ++q) acc += rule.weights[q] * fv[q];
    total += acc * g.hx * g.hy;
  }
  return total;
}

} // namespace perifem
