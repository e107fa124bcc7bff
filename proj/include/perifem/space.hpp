#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "perifem/errors.hpp"
#include "perifem/mesh.hpp"
#include "perifem/quadrature.hpp"
#include "perifem/reference.hpp"

namespace perifem {

enum class Family { CG, DG, RT };

struct BasisTable {
  int npts = 0;
  int ndof = 0;
  // scalar families (reference values / partials)
  std::vector<double> val, dx, dy;
  // RT (reference values / divergence)
  std::vector<double> vx, vy, div;

  double& at(std::vector<double>& v, int q, int i) { return v[q * ndof + i]; }
  double get(const std::vector<double>& v, int q, int i) const { return v[q * ndof + i]; }
};

struct ElemGeom {
  double x0 = 0, y0 = 0, hx = 0, hy = 0;
};

class FunctionSpace {
 public:
  Family family = Family::CG;
  int degree = 1; // polynomial degree for CG/DG, suborder k for RT

  const Mesh1D* mesh1 = nullptr;
  const Mesh2D* mesh2 = nullptr;

  int spatial_dim() const { return mesh1 ? 1 : 2; }
  int value_rank() const { return family == Family::RT ? 1 : 0; }
  int dim() const { return ndof_global_; }
  int n_elements() const { return mesh1 ? mesh1->n_elements() : mesh2->n_cells(); }
  int ndof_local() const { return ndof_local_; }

  // Highest per-direction polynomial degree of the basis.
  int max_degree() const { return family == Family::RT ? degree + 1 : degree; }

  const int* dof_indices(int e) const { return &dofmap_idx_[e * ndof_local_]; }
  const std::int8_t* dof_signs(int e) const { return &dofmap_sign_[e * ndof_local_]; }

  std::pair<std::vector<int>, std::vector<int>> dof_map(int e) const {
    std::vector<int> idx(dof_indices(e), dof_indices(e) + ndof_local_);
    std::vector<int> sgn(dof_signs(e), dof_signs(e) + ndof_local_);
    return {idx, sgn};
  }

  ElemGeom elem_geom(int e) const {
    if (mesh1) return {mesh1->vertex_x[e], 0.0, mesh1->widths[e], 1.0};
    return {mesh2->cell_x0(e), mesh2->cell_y0(e), mesh2->dx, mesh2->dy};
  }

  // Reference-element tabulation at the given reference points.
  BasisTable tabulate(const std::vector<double>& x,
                      const std::vector<double>& y = {}) const {
    BasisTable t;
    t.npts = static_cast<int>(x.size());
    t.ndof = ndof_local_;
    if (family == Family::RT) {
      t.vx.resize(t.npts * t.ndof);
      t.vy.resize(t.npts * t.ndof);
      t.div.resize(t.npts * t.ndof);
      for (int q = 0; q < t.npts; ++q)
        for (int i = 0; i < t.ndof; ++i)
          rt_->eval(i, x[q], y[q], &t.vx[q * t.ndof + i], &t.vy[q * t.ndof + i],
                    &t.div[q * t.ndof + i]);
      return t;
    }
    t.val.resize(t.npts * t.ndof);
    t.dx.resize(t.npts * t.ndof);
    if (mesh1) {
      std::vector<double> v(nodes_x_.size()), d(nodes_x_.size());
      for (int q = 0; q < t.npts; ++q) {
        lagrange_eval(nodes_x_, x[q], v.data(), d.data());
        for (int i = 0; i < t.ndof; ++i) {
          t.val[q * t.ndof + i] = v[i];
          t.dx[q * t.ndof + i] = d[i];
        }
      }
      return t;
    }
    t.dy.resize(t.npts * t.ndof);
    int n1 = static_cast<int>(nodes_x_.size());
    std::vector<double> vx(n1), dx(n1), vy(n1), dy(n1);
    for (int q = 0; q < t.npts; ++q) {
      lagrange_eval(nodes_x_, x[q], vx.data(), dx.data());
      lagrange_eval(nodes_x_, y[q], vy.data(), dy.data());
      for (int b = 0; b < n1; ++b)
        for (int a = 0; a < n1; ++a) {
          int i = b * n1 + a;
          t.val[q * t.ndof + i] = vx[a] * vy[b];
          t.dx[q * t.ndof + i] = dx[a] * vy[b];
          t.dy[q * t.ndof + i] = vx[a] * dy[b];
        }
    }
    return t;
  }

  // Reference coordinates of the local nodes (scalar families only).
  const std::vector<double>& local_node_x() const { return node_x_; }
  const std::vector<double>& local_node_y() const { return node_y_; }

  const RTElement& rt_element() const { return *rt_; }

  // "vertex" / "edge" / "cell" classification of a global dof, for dumps.
  std::string entity_kind(int gdof) const {
    if (mesh1) {
      if (family == Family::CG) return gdof < mesh1->n_vertices() ? "vertex" : "cell";
      return "cell";
    }
    int nv = mesh2->n_vertices(), ne = mesh2->n_edges();
    switch (family) {
      case Family::CG:
        if (degree == 1) return "vertex";
        if (gdof < nv) return "vertex";
        if (gdof < nv + ne) return "edge";
        return "cell";
      case Family::RT:
        return gdof < (degree + 1) * ne ? "edge" : "cell";
      case Family::DG:
        return "cell";
    }
    return "cell";
  }

  friend FunctionSpace make_space(const Mesh1D& mesh, Family family, int degree);
  friend FunctionSpace make_space(const Mesh2D& mesh, Family family, int degree);

 private:
  int ndof_local_ = 0;
  int ndof_global_ = 0;
  std::vector<int> dofmap_idx_;
  std::vector<std::int8_t> dofmap_sign_;
  std::vector<double> nodes_x_; // 1D Lagrange nodes (per direction in 2D)
  std::vector<double> node_x_, node_y_; // local node reference coords
  std::shared_ptr<const RTElement> rt_;
};

inline FunctionSpace make_space(const Mesh1D& mesh, Family family, int degree) {
  FunctionSpace s;
  s.mesh1 = &mesh;
  s.family = family;
  s.degree = degree;
  int ne = mesh.n_elements();
  if (family == Family::CG) {
    if (degree < 1 || degree > 3)
      throw UnsupportedSpace("1D CG degree must be in 1..3");
    s.nodes_x_ = lagrange_nodes(degree);
    s.ndof_local_ = degree + 1;
    s.ndof_global_ = degree * ne;
    s.dofmap_idx_.resize(ne * s.ndof_local_);
    s.dofmap_sign_.assign(ne * s.ndof_local_, 1);
    for (int e = 0; e < ne; ++e) {
      int* row = &s.dofmap_idx_[e * s.ndof_local_];
      row[0] = mesh.left_vertex(e);
      row[degree] = mesh.right_vertex(e);
      for (int k = 1; k < degree; ++k)
        row[k] = ne + e * (degree - 1) + (k - 1);
    }
  } else if (family == Family::DG) {
    if (degree < 0 || degree > 3)
      throw UnsupportedSpace("1D DG degree must be in 0..3");
    s.nodes_x_ = lagrange_nodes(degree);
    s.ndof_local_ = degree + 1;
    s.ndof_global_ = (degree + 1) * ne;
    s.dofmap_idx_.resize(ne * s.ndof_local_);
    s.dofmap_sign_.assign(ne * s.ndof_local_, 1);
    for (int e = 0; e < ne; ++e)
      for (int k = 0; k <= degree; ++k)
        s.dofmap_idx_[e * s.ndof_local_ + k] = e * (degree + 1) + k;
  } else {
    throw UnsupportedSpace("RT spaces are two-dimensional");
  }
  s.node_x_ = s.nodes_x_;
  s.node_y_.assign(s.node_x_.size(), 0.0);
  return s;
}

inline FunctionSpace make_space(const Mesh2D& mesh, Family family, int degree) {
  FunctionSpace s;
  s.mesh2 = &mesh;
  s.family = family;
  s.degree = degree;
  int nc = mesh.n_cells(), nv = mesh.n_vertices(), nedge = mesh.n_edges();
  int nx = mesh.nx, ny = mesh.ny;

  if (family == Family::CG) {
    if (degree < 1 || degree > 2)
      throw UnsupportedSpace("2D CG degree must be 1 or 2");
    s.nodes_x_ = lagrange_nodes(degree);
    int n1 = degree + 1;
    s.ndof_local_ = n1 * n1;
    s.ndof_global_ = (degree == 1) ? nv : nv + nedge + nc;
    s.dofmap_idx_.resize(nc * s.ndof_local_);
    s.dofmap_sign_.assign(nc * s.ndof_local_, 1);
    for (int c = 0; c < nc; ++c) {
      int i = mesh.cell_i(c), j = mesh.cell_j(c);
      int* row = &s.dofmap_idx_[c * s.ndof_local_];
      if (degree == 1) {
        auto vv = mesh.cell_vertices(c);
        for (int l = 0; l < 4; ++l) row[l] = vv[l];
      } else {
        row[0] = mesh.vertex(i, j);
        row[1] = nv + mesh.hedge(i, j);
        row[2] = mesh.vertex(i + 1, j);
        row[3] = nv + mesh.vedge(i, j);
        row[4] = nv + nedge + c;
        row[5] = nv + mesh.vedge(i + 1, j);
        row[6] = mesh.vertex(i, j + 1);
        row[7] = nv + mesh.hedge(i, j + 1);
        row[8] = mesh.vertex(i + 1, j + 1);
      }
    }
  } else if (family == Family::DG) {
    if (degree < 0 || degree > 1)
      throw UnsupportedSpace("2D DG degree must be 0 or 1");
    s.nodes_x_ = lagrange_nodes(degree);
    int n1 = degree + 1;
    s.ndof_local_ = n1 * n1;
    s.ndof_global_ = nc * s.ndof_local_;
    s.dofmap_idx_.resize(nc * s.ndof_local_);
    s.dofmap_sign_.assign(nc * s.ndof_local_, 1);
    for (int c = 0; c < nc; ++c)
      for (int l = 0; l < s.ndof_local_; ++l)
        s.dofmap_idx_[c * s.ndof_local_ + l] = c * s.ndof_local_ + l;
  } else {
    if (degree < 0 || degree > 1)
      throw UnsupportedSpace("RT order must be 0 or 1");
    s.rt_ = std::make_shared<const RTElement>(degree);
    int k = degree;
    int per_edge = k + 1;
    int n_int = 2 * k * (k + 1);
    s.ndof_local_ = 4 * per_edge + n_int;
    s.ndof_global_ = per_edge * nedge + n_int * nc;
    s.dofmap_idx_.resize(nc * s.ndof_local_);
    s.dofmap_sign_.resize(nc * s.ndof_local_);
    for (int c = 0; c < nc; ++c) {
      auto edges = mesh.cell_edges(c);
      auto signs = Mesh2D::cell_edge_signs();
      int* row = &s.dofmap_idx_[c * s.ndof_local_];
      std::int8_t* sg = &s.dofmap_sign_[c * s.ndof_local_];
      int l = 0;
      for (int edge = 0; edge < 4; ++edge)
        for (int m = 0; m < per_edge; ++m, ++l) {
          row[l] = edges[edge] * per_edge + m;
          sg[l] = static_cast<std::int8_t>(signs[edge]);
        }
      for (int m = 0; m < n_int; ++m, ++l) {
        row[l] = per_edge * nedge + c * n_int + m;
        sg[l] = 1;
      }
    }
  }

  if (family != Family::RT) {
    int n1 = degree + 1;
    s.node_x_.resize(s.ndof_local_);
    s.node_y_.resize(s.ndof_local_);
    for (int b = 0; b < n1; ++b)
      for (int a = 0; a < n1; ++a) {
        s.node_x_[b * n1 + a] = s.nodes_x_[a];
        s.node_y_[b * n1 + a] = s.nodes_x_[b];
      }
  }
  return s;
}

struct FEFunction {
  const FunctionSpace* space = nullptr;
  Eigen::VectorXd coeffs;

  FEFunction() = default;
  explicit FEFunction(const FunctionSpace& V)
      : space(&V), coeffs(Eigen::VectorXd::Zero(V.dim())) {}
  FEFunction(const FunctionSpace& V, Eigen::VectorXd c)
      : space(&V), coeffs(std::move(c)) {}
};

using ScalarField = std::function<double(double, double)>;
using VectorField = std::function<std::array<double, 2>(double, double)>;

// Nodal interpolation for CG/DG; fields must be periodic on the mesh.
inline FEFunction interpolate(const FunctionSpace& V, const ScalarField& f) {
  if (V.value_rank() != 0)
    throw std::invalid_argument("interpolate: scalar field into vector-valued space");
  FEFunction out(V);
  const auto& nx = V.local_node_x();
  const auto& ny = V.local_node_y();
  for (int e = 0; e < V.n_elements(); ++e) {
    ElemGeom g = V.elem_geom(e);
    const int* idx = V.dof_indices(e);
    for (int l = 0; l < V.ndof_local(); ++l)
      out.coeffs[idx[l]] = f(g.x0 + nx[l] * g.hx, g.y0 + ny[l] * g.hy);
  }
  return out;
}

// Raviart-Thomas interpolation: edge-normal flux moments against shifted
// Legendre polynomials (global +x/+y normals, ascending edge parameter),
// plus interior moments for order >= 1.
inline FEFunction interpolate(const FunctionSpace& V, const VectorField& f) {
  if (V.value_rank() != 1)
    throw std::invalid_argument("interpolate: vector field into scalar space");
  const Mesh2D& mesh = *V.mesh2;
  int k = V.degree;
  FEFunction out(V);
  QuadratureRule1D rule = gauss_legendre(k + 3);
  auto legendre = [](int m, double t) { return m == 0 ? 1.0 : 2.0 * t - 1.0; };

  int per_edge = k + 1;
  for (int j = 0; j < mesh.ny; ++j)
    for (int i = 0; i < mesh.nx; ++i) {
      int ev = mesh.vedge(i, j);
      double x = i * mesh.dx, y0 = j * mesh.dy;
      for (int m = 0; m < per_edge; ++m) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q) {
          double t = rule.points[q];
          acc += rule.weights[q] * f(x, y0 + t * mesh.dy)[0] * legendre(m, t);
        }
        out.coeffs[ev * per_edge + m] = acc * mesh.dy;
      }
      int eh = mesh.hedge(i, j);
      double x0 = i * mesh.dx, y = j * mesh.dy;
      for (int m = 0; m < per_edge; ++m) {
        double acc = 0.0;
        for (int q = 0; q < rule.size(); ++q) {
          double t = rule.points[q];
          acc += rule.weights[q] * f(x0 + t * mesh.dx, y)[1] * legendre(m, t);
        }
        out.coeffs[eh * per_edge + m] = acc * mesh.dx;
      }
    }

  if (k >= 1) {
    int n_int = 2 * k * (k + 1);
    int off = per_edge * mesh.n_edges();
    QuadratureRule2D cell_rule = tensor_rule(k + 3);
    for (int c = 0; c < mesh.n_cells(); ++c) {
      double x0 = mesh.cell_x0(c), y0 = mesh.cell_y0(c);
      for (int comp = 0; comp < 2; ++comp)
        for (int m = 0; m <= k; ++m) {
          double acc = 0.0;
          for (int q = 0; q < cell_rule.size(); ++q) {
            double xr = cell_rule.x[q], yr = cell_rule.y[q];
            auto u = f(x0 + xr * mesh.dx, y0 + yr * mesh.dy);
            double scaled = (comp == 0) ? u[0] * mesh.dy : u[1] * mesh.dx;
            double wp = (comp == 0) ? std::pow(yr, m) : std::pow(xr, m);
            acc += cell_rule.weights[q] * scaled * wp;
          }
          out.coeffs[off + c * n_int + comp * (k + 1) + m] = acc;
        }
    }
  }
  return out;
}

// Point evaluation at reference points of one element (physical values;
// the contravariant Piola map is applied for RT).
inline Eigen::VectorXd evaluate_scalar(const FEFunction& f, int e,
                                       const std::vector<double>& x,
                                       const std::vector<double>& y = {}) {
  const FunctionSpace& V = *f.space;
  BasisTable t = V.tabulate(x, y.empty() ? std::vector<double>(x.size(), 0.0) : y);
  const int* idx = V.dof_indices(e);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(t.npts);
  for (int q = 0; q < t.npts; ++q)
    for (int l = 0; l < t.ndof; ++l)
      out[q] += f.coeffs[idx[l]] * t.val[q * t.ndof + l];
  return out;
}

inline Eigen::MatrixX2d evaluate_gradient(const FEFunction& f, int e,
                                          const std::vector<double>& x,
                                          const std::vector<double>& y = {}) {
  const FunctionSpace& V = *f.space;
  ElemGeom g = V.elem_geom(e);
  BasisTable t = V.tabulate(x, y.empty() ? std::vector<double>(x.size(), 0.0) : y);
  const int* idx = V.dof_indices(e);
  Eigen::MatrixX2d out = Eigen::MatrixX2d::Zero(t.npts, 2);
  for (int q = 0; q < t.npts; ++q)
    for (int l = 0; l < t.ndof; ++l) {
      out(q, 0) += f.coeffs[idx[l]] * t.dx[q * t.ndof + l] / g.hx;
      if (V.spatial_dim() == 2)
        out(q, 1) += f.coeffs[idx[l]] * t.dy[q * t.ndof + l] / g.hy;
    }
  return out;
}

inline Eigen::MatrixX2d evaluate_vector(const FEFunction& f, int e,
                                        const std::vector<double>& x,
                                        const std::vector<double>& y) {
  const FunctionSpace& V = *f.space;
  if (V.value_rank() != 1)
    throw std::invalid_argument("evaluate_vector: scalar space");
  ElemGeom g = V.elem_geom(e);
  BasisTable t = V.tabulate(x, y);
  const int* idx = V.dof_indices(e);
  const std::int8_t* sg = V.dof_signs(e);
  Eigen::MatrixX2d out = Eigen::MatrixX2d::Zero(t.npts, 2);
  for (int q = 0; q < t.npts; ++q)
    for (int l = 0; l < t.ndof; ++l) {
      double c = sg[l] * f.coeffs[idx[l]];
      out(q, 0) += c * t.vx[q * t.ndof + l] / g.hy;
      out(q, 1) += c * t.vy[q * t.ndof + l] / g.hx;
    }
  return out;
}

inline Eigen::VectorXd evaluate_divergence(const FEFunction& f, int e,
                                           const std::vector<double>& x,
                                           const std::vector<double>& y) {
  const FunctionSpace& V = *f.space;
  if (V.value_rank() != 1)
    throw std::invalid_argument("evaluate_divergence: scalar space");
  ElemGeom g = V.elem_geom(e);
  BasisTable t = V.tabulate(x, y);
  const int* idx = V.dof_indices(e);
  const std::int8_t* sg = V.dof_signs(e);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(t.npts);
  for (int q = 0; q < t.npts; ++q)
    for (int l = 0; l < t.ndof; ++l)
      out[q] += sg[l] * f.coeffs[idx[l]] * t.div[q * t.ndof + l] / (g.hx * g.hy);
  return out;
}

} // namespace perifem
