#include "ebf/linalg.hpp"

#include "ebf/error.hpp"

namespace ebf {

Vector solve_tridiagonal(const Vector& lower, const Vector& diag, const Vector& upper,
                         const Vector& rhs) {
  const Eigen::Index n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n) {
    throw InvalidInput("tridiagonal system size mismatch");
  }
  if (n == 0) return Vector();
  Vector c(n);
  Vector x(n);
  double pivot = diag[0];
  if (pivot == 0.0) throw SolverError("tridiagonal solve: zero pivot in row 0");
  c[0] = upper[0] / pivot;
  x[0] = rhs[0] / pivot;
  for (Eigen::Index i = 1; i < n; ++i) {
    pivot = diag[i] - lower[i] * c[i - 1];
    if (pivot == 0.0) {
      throw SolverError("tridiagonal solve: zero pivot in row " + std::to_string(i));
    }
    c[i] = (i + 1 < n) ? upper[i] / pivot : 0.0;
    x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] -= c[i] * x[i + 1];
  return x;
}

Vector apply_shifted(const SparseCovariance& k, const Vector& d, const Vector& v) {
  if (k.rows() != k.cols() || d.size() != k.rows() || v.size() != k.cols()) {
    throw InvalidInput("apply_shifted: size mismatch");
  }
  Vector y(k.rows());
  for (int i = 0; i < k.rows(); ++i) {
    double acc = d[i] * v[i];
    for (const auto& e : k.row(i)) acc += e.value * v[e.col];
    y[i] = acc;
  }
  return y;
}

ShiftedFactor::ShiftedFactor(const SparseCovariance& k, const Vector& d) : n_(k.rows()) {
  if (k.rows() != k.cols() || d.size() != k.rows()) {
    throw InvalidInput("ShiftedFactor: size mismatch");
  }
  Eigen::SparseMatrix<double> m = k.to_eigen();
  Eigen::SparseMatrix<double> shift(n_, n_);
  std::vector<Eigen::Triplet<double>> diag;
  for (int i = 0; i < n_; ++i) diag.emplace_back(i, i, d[i]);
  shift.setFromTriplets(diag.begin(), diag.end());
  m = m + shift;
  llt_.compute(m);
  if (llt_.info() != Eigen::Success) {
    throw SolverError("K_ss + D is not positive definite (model misspecification)");
  }
}

Vector ShiftedFactor::solve(const Vector& rhs) const {
  if (rhs.size() != n_) throw InvalidInput("ShiftedFactor::solve: size mismatch");
  return llt_.solve(rhs);
}

Matrix ShiftedFactor::solve(const Matrix& rhs) const {
  if (rhs.rows() != n_) throw InvalidInput("ShiftedFactor::solve: size mismatch");
  return llt_.solve(rhs);
}

}  // namespace ebf
