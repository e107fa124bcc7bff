#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "perifem/errors.hpp"
#include "perifem/space.hpp"
#include "perifem/sparse.hpp"

namespace perifem {

using IterObserver = std::function<void(int, const Eigen::VectorXd&)>;

struct CGResult {
  Eigen::VectorXd x;
  SolveReport report;
};

// Conjugate gradients with Jacobi preconditioning. The matrix must carry the
// symmetric flag and have a strictly positive diagonal.
inline CGResult cg_solve(const SparseMatrix& A, const Eigen::VectorXd& b,
                         double tol = 1e-12, int max_iter = 0,
                         const IterObserver& observer = nullptr) {
  if (A.rows != A.cols) throw InvalidMatrix("cg_solve: matrix not square");
  if (!A.symmetric) throw InvalidMatrix("cg_solve: matrix not symmetric");
  if (b.size() != A.rows) throw std::invalid_argument("cg_solve: size mismatch");
  if (max_iter <= 0) max_iter = 10 * A.rows + 100;

  Eigen::VectorXd diag = A.diagonal();
  for (int i = 0; i < A.rows; ++i)
    if (diag[i] <= 0.0)
      throw InvalidMatrix("cg_solve: non-positive diagonal entry");

  CGResult res;
  res.x = Eigen::VectorXd::Zero(A.rows);
  double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.report = {0, 0.0, true};
    return res;
  }

  Eigen::VectorXd r = b;
  Eigen::VectorXd z = r.cwiseQuotient(diag);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int k = 1; k <= max_iter; ++k) {
    Eigen::VectorXd Ap = A.apply(p);
    double pAp = p.dot(Ap);
    if (pAp <= 0.0) throw InvalidMatrix("cg_solve: matrix not positive definite");
    double alpha = rz / pAp;
    res.x += alpha * p;
    r -= alpha * Ap;
    if (observer) observer(k, res.x);
    double rel = r.norm() / bnorm;
    if (rel <= tol) {
      res.report = {k, rel, true};
      return res;
    }
    z = r.cwiseQuotient(diag);
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  SolveReport rep{max_iter, r.norm() / bnorm, false};
  throw SolverFailure("cg_solve: no convergence within max_iter", rep);
}

// Orthonormal basis of the hyperplane orthogonal to m (Householder columns).
inline Eigen::MatrixXd householder_complement(const Eigen::VectorXd& m) {
  int n = static_cast<int>(m.size());
  double norm = m.norm();
  if (norm == 0.0) throw std::invalid_argument("householder_complement: zero vector");
  Eigen::VectorXd v = m / norm;
  v[0] += (v[0] >= 0.0 ? 1.0 : -1.0);
  double vv = v.squaredNorm();
  Eigen::MatrixXd Z(n, n - 1);
  for (int c = 1; c < n; ++c) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[c] = 1.0;
    Z.col(c - 1) = e - (2.0 * v[c] / vv) * v;
  }
  return Z;
}

struct EigResult {
  Eigen::VectorXd values;  // ascending
  Eigen::MatrixXd vectors; // columns, in the full space
};

// Smallest k eigenpairs of A v = lambda B v (A symmetric, B SPD), dense.
// With a constraint vector m, the pencil is restricted to {v : m.v = 0}.
inline EigResult smallest_generalized_eigs(
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int k,
    std::optional<Eigen::VectorXd> constraint = std::nullopt,
    int dense_cap = 4096) {
  int n = static_cast<int>(A.rows());
  if (A.cols() != n || B.rows() != n || B.cols() != n)
    throw std::invalid_argument("smallest_generalized_eigs: shape mismatch");
  if (n > dense_cap)
    throw TooLarge("smallest_generalized_eigs: problem exceeds dense cap");

  Eigen::MatrixXd Ar = A, Br = B;
  Eigen::MatrixXd Z;
  if (constraint) {
    Z = householder_complement(*constraint);
    Ar = Z.transpose() * A * Z;
    Br = Z.transpose() * B * Z;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(Ar, Br);
  if (solver.info() != Eigen::Success)
    throw InvalidMatrix("smallest_generalized_eigs: solver failed (B not SPD?)");

  int m = static_cast<int>(solver.eigenvalues().size());
  k = std::min(k, m);
  EigResult res;
  res.values = solver.eigenvalues().head(k);
  Eigen::MatrixXd vecs = solver.eigenvectors().leftCols(k);
  res.vectors = constraint ? Eigen::MatrixXd(Z * vecs) : vecs;
  return res;
}

inline EigResult smallest_generalized_eigs(
    const SparseMatrix& A, const SparseMatrix& B, int k,
    std::optional<Eigen::VectorXd> constraint = std::nullopt,
    int dense_cap = 4096) {
  return smallest_generalized_eigs(A.to_dense(), B.to_dense(), k, constraint,
                                   dense_cap);
}

// Exact solver for block-diagonal DG mass matrices (per-element Cholesky).
class BlockDiagSolver {
 public:
  BlockDiagSolver(const FunctionSpace& V, const SparseMatrix& M) {
    if (V.family != Family::DG)
      throw std::invalid_argument("BlockDiagSolver: DG space required");
    if (M.rows != V.dim())
      throw std::invalid_argument("BlockDiagSolver: size mismatch");
    nl_ = V.ndof_local();
    ne_ = V.n_elements();
    idx_.resize(ne_ * nl_);
    factors_.reserve(ne_);
    Eigen::MatrixXd block(nl_, nl_);
    for (int e = 0; e < ne_; ++e) {
      const int* idx = V.dof_indices(e);
      for (int i = 0; i < nl_; ++i) {
        idx_[e * nl_ + i] = idx[i];
        for (int j = 0; j < nl_; ++j) block(i, j) = M.coeff(idx[i], idx[j]);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(block);
      if (llt.info() != Eigen::Success)
        throw InvalidMatrix("BlockDiagSolver: block not SPD");
      factors_.push_back(llt);
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x(b.size());
    Eigen::VectorXd local(nl_);
    for (int e = 0; e < ne_; ++e) {
      for (int i = 0; i < nl_; ++i) local[i] = b[idx_[e * nl_ + i]];
      Eigen::VectorXd sol = factors_[e].solve(local);
      for (int i = 0; i < nl_; ++i) x[idx_[e * nl_ + i]] = sol[i];
    }
    return x;
  }

 private:
  int nl_ = 0, ne_ = 0;
  std::vector<int> idx_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors_;
};

} // namespace perifem
