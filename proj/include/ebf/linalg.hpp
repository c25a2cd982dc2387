#pragma once

#include "ebf/kernel.hpp"
#include "ebf/types.hpp"

#include <Eigen/SparseCholesky>

namespace ebf {

/// Thomas algorithm for a tridiagonal system. `lower[i]` multiplies x[i-1]
/// and `upper[i]` multiplies x[i+1] in row i; lower[0] and upper[n-1] are
/// ignored. Throws SolverError on a zero pivot.
Vector solve_tridiagonal(const Vector& lower, const Vector& diag, const Vector& upper,
                         const Vector& rhs);

/// y = (K + diag(d)) v with row i summed as d_i v_i first, then the stored
/// entries of K in ascending column order. The distributed matvec uses the
/// same order, so both agree bit for bit.
Vector apply_shifted(const SparseCovariance& k, const Vector& d, const Vector& v);

/// Sparse Cholesky factor of K + diag(d).
class ShiftedFactor {
 public:
  ShiftedFactor(const SparseCovariance& k, const Vector& d);

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  int size() const noexcept { return n_; }

 private:
  int n_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

}  // namespace ebf
