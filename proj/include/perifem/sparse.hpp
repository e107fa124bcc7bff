#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace perifem {

struct SparseMatrix {
  int rows = 0, cols = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> vals;
  bool symmetric = false;

  int nnz() const { return static_cast<int>(vals.size()); }

  double coeff(int r, int c) const {
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      if (col_idx[k] == c) return vals[k];
    return 0.0;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
    for (int r = 0; r < rows; ++r)
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        y[r] += vals[k] * x[col_idx[k]];
    return y;
  }

  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(cols);
    for (int r = 0; r < rows; ++r)
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        y[col_idx[k]] += vals[k] * x[r];
    return y;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        d(r, col_idx[k]) = vals[k];
    return d;
  }

  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(rows);
    for (int r = 0; r < rows; ++r)
      d[r] = coeff(r, r);
    return d;
  }
};

// Accumulates entries in a fixed insertion order so repeated assembly of the
// same problem produces bit-identical CSR arrays.
class SparseBuilder {
 public:
  SparseBuilder(int rows, int cols) : rows_(rows), cols_(cols), row_(rows) {}

  void add(int r, int c, double v) {
    auto& entries = row_[r];
    for (auto& e : entries)
      if (e.first == c) {
        e.second += v;
        return;
      }
    entries.emplace_back(c, v);
  }

  void set(int r, int c, double v) {
    auto& entries = row_[r];
    for (auto& e : entries)
      if (e.first == c) {
        e.second = v;
        return;
      }
    entries.emplace_back(c, v);
  }

  SparseMatrix finalize() {
    SparseMatrix m;
    m.rows = rows_;
    m.cols = cols_;
    m.row_ptr.resize(rows_ + 1, 0);
    for (int r = 0; r < rows_; ++r) {
      std::sort(row_[r].begin(), row_[r].end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      m.row_ptr[r + 1] = m.row_ptr[r] + static_cast<int>(row_[r].size());
    }
    m.col_idx.reserve(m.row_ptr[rows_]);
    m.vals.reserve(m.row_ptr[rows_]);
    for (int r = 0; r < rows_; ++r)
      for (const auto& e : row_[r]) {
        m.col_idx.push_back(e.first);
        m.vals.push_back(e.second);
      }
    m.symmetric = detect_symmetry(m);
    return m;
  }

 private:
  static bool detect_symmetry(const SparseMatrix& m) {
    if (m.rows != m.cols) return false;
    double amax = 0.0;
    for (double v : m.vals) amax = std::max(amax, std::abs(v));
    if (amax == 0.0) return true;
    for (int r = 0; r < m.rows; ++r)
      for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
        if (std::abs(m.vals[k] - m.coeff(m.col_idx[k], r)) > 1e-13 * amax)
          return false;
    return true;
  }

  int rows_, cols_;
  std::vector<std::vector<std::pair<int, double>>> row_;
};

} // namespace perifem
