#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "perifem/quadrature.hpp"

namespace perifem {

inline std::vector<double> lagrange_nodes(int p) {
  if (p == 0) return {0.5};
  std::vector<double> nodes(p + 1);
  for (int k = 0; k <= p; ++k)
    nodes[k] = static_cast<double>(k) / p;
  return nodes;
}

// Lagrange basis through the given nodes, evaluated at x: fills values and
// first derivatives for all basis functions.
inline void lagrange_eval(const std::vector<double>& nodes, double x,
                          double* val, double* der) {
  int n = static_cast<int>(nodes.size());
  for (int i = 0; i < n; ++i) {
    double v = 1.0;
    for (int j = 0; j < n; ++j)
      if (j != i) v *= (x - nodes[j]) / (nodes[i] - nodes[j]);
    val[i] = v;
    double d = 0.0;
    for (int m = 0; m < n; ++m) {
      if (m == i) continue;
      double t = 1.0 / (nodes[i] - nodes[m]);
      for (int j = 0; j < n; ++j)
        if (j != i && j != m) t *= (x - nodes[j]) / (nodes[i] - nodes[j]);
      d += t;
    }
    der[i] = d;
  }
}

// Raviart-Thomas element of order k on the reference square [0,1]^2.
// Span: x-component in Q_{k+1,k}, y-component in Q_{k,k+1}.
//
// Degrees of freedom (local order):
//   4*(k+1) edge moments, edges ordered [left,right,bottom,top], each with
//   moments of u.n_outward against shifted Legendre P_m (P_0=1, P_1=2t-1)
//   in the ascending edge parameter; then for k>=1 interior moments of the
//   x-component against {1,y} and the y-component against {1,x}.
//
// The nodal basis is obtained by inverting the functional/monomial matrix.
struct RTElement {
  int k = 0;
  int ndof = 0;
  int n_edge_dofs = 0;
  // monomial exponents, x-component block then y-component block
  std::vector<std::array<int, 2>> mono_x;
  std::vector<std::array<int, 2>> mono_y;
  // coeff(m, j): coefficient of monomial m in basis function j
  Eigen::MatrixXd coeff;

  explicit RTElement(int order) : k(order) {
    if (k < 0 || k > 1)
      throw std::invalid_argument("RTElement: order must be 0 or 1");
    for (int b = 0; b <= k; ++b)
      for (int a = 0; a <= k + 1; ++a)
        mono_x.push_back({a, b});
    for (int b = 0; b <= k + 1; ++b)
      for (int a = 0; a <= k; ++a)
        mono_y.push_back({a, b});
    int nmx = static_cast<int>(mono_x.size());
    int nm = nmx + static_cast<int>(mono_y.size());
    n_edge_dofs = 4 * (k + 1);
    ndof = nm;

    QuadratureRule1D edge_rule = gauss_legendre(k + 3);
    QuadratureRule2D cell_rule = tensor_rule(k + 3);

    auto mono_val = [&](int m, double x, double y) -> std::array<double, 2> {
      if (m < nmx) {
        auto [a, b] = mono_x[m];
        return {std::pow(x, a) * std::pow(y, b), 0.0};
      }
      auto [a, b] = mono_y[m - nmx];
      return {0.0, std::pow(x, a) * std::pow(y, b)};
    };
    auto legendre = [](int m, double t) { return m == 0 ? 1.0 : 2.0 * t - 1.0; };

    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(ndof, ndof);
    for (int j = 0; j < ndof; ++j) {
      int row = 0;
      // edge moments against outward normals
      for (int edge = 0; edge < 4; ++edge) {
        for (int m = 0; m <= k; ++m, ++row) {
          double acc = 0.0;
          for (int q = 0; q < edge_rule.size(); ++q) {
            double t = edge_rule.points[q], w = edge_rule.weights[q];
            double x = 0, y = 0, nx = 0, ny = 0;
            switch (edge) {
              case 0: x = 0; y = t; nx = -1; ny = 0; break;
              case 1: x = 1; y = t; nx = +1; ny = 0; break;
              case 2: x = t; y = 0; nx = 0; ny = -1; break;
              case 3: x = t; y = 1; nx = 0; ny = +1; break;
            }
            auto u = mono_val(j, x, y);
            acc += w * (u[0] * nx + u[1] * ny) * legendre(m, t);
          }
          V(row, j) = acc;
        }
      }
      // interior moments
      if (k >= 1) {
        for (int comp = 0; comp < 2; ++comp)
          for (int m = 0; m <= k; ++m, ++row) {
            double acc = 0.0;
            for (int q = 0; q < cell_rule.size(); ++q) {
              double x = cell_rule.x[q], y = cell_rule.y[q];
              auto u = mono_val(j, x, y);
              double weight_poly = (comp == 0) ? std::pow(y, m) : std::pow(x, m);
              acc += cell_rule.weights[q] * u[comp] * weight_poly;
            }
            V(row, j) = acc;
          }
      }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
    if (!lu.isInvertible())
      throw std::runtime_error("RTElement: singular duality system");
    coeff = lu.inverse();
  }

  // Reference values and divergence of basis function j at (x,y).
  void eval(int j, double x, double y, double* vx, double* vy, double* div) const {
    int nmx = static_cast<int>(mono_x.size());
    double ax = 0, ay = 0, d = 0;
    for (int m = 0; m < nmx; ++m) {
      auto [a, b] = mono_x[m];
      double c = coeff(m, j);
      if (c == 0.0) continue;
      double pb = std::pow(y, b);
      ax += c * std::pow(x, a) * pb;
      if (a > 0) d += c * a * std::pow(x, a - 1) * pb;
    }
    for (int m = 0; m < static_cast<int>(mono_y.size()); ++m) {
      auto [a, b] = mono_y[m];
      double c = coeff(m + nmx, j);
      if (c == 0.0) continue;
      double pa = std::pow(x, a);
      ay += c * pa * std::pow(y, b);
      if (b > 0) d += c * b * pa * std::pow(y, b - 1);
    }
    *vx = ax;
    *vy = ay;
    *div = d;
  }
};

} // namespace perifem
