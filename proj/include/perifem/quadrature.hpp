#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace perifem {

// Gauss-Legendre rule on [0,1]; exact for polynomials of degree <= 2n-1.
struct QuadratureRule1D {
  std::vector<double> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
};

inline QuadratureRule1D gauss_legendre(int n) {
  if (n < 1 || n > 64)
    throw std::invalid_argument("gauss_legendre: n out of range [1,64]");

  QuadratureRule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);

  // Newton iteration on P_n over [-1,1], then map to [0,1].
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) {
        p0 = 1.0;
        p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        break;
      }
    }
    rule.points[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

// Tensor-product rule on the reference square [0,1]^2.
struct QuadratureRule2D {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
};

inline QuadratureRule2D tensor_rule(int n) {
  QuadratureRule1D r = gauss_legendre(n);
  QuadratureRule2D rule;
  rule.x.reserve(n * n);
  rule.y.reserve(n * n);
  rule.weights.reserve(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      rule.x.push_back(r.points[i]);
      rule.y.push_back(r.points[j]);
      rule.weights.push_back(r.weights[i] * r.weights[j]);
    }
  return rule;
}

// Points per direction for an integrand of polynomial degree d, with
// headroom so refining the rule leaves assembled matrices unchanged.
inline int points_for_degree(int d) { return d + 2; }

} // namespace perifem
