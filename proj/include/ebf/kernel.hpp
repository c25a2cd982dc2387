#pragma once

#include "ebf/types.hpp"

#include <Eigen/Sparse>

#include <cstddef>
#include <span>
#include <vector>

namespace ebf {

/// Euclidean distance; throws InvalidInput on a dimension mismatch.
double distance(const Point& a, const Point& b);

/// Compactly supported covariance
///
///   k(r) = sf2 * [ (2 + cos(2 pi r / l)) / 3 * (1 - r / l) + sin(2 pi r / l) / (2 pi) ]
///
/// for r < l and exactly zero otherwise. The function vanishes with its
/// first four derivatives at r = l, so near the boundary the closed form
/// cancels catastrophically; evaluation switches to a series in (1 - r/l)
/// there, which keeps k strictly positive on the open support.
class CompactKernel {
 public:
  CompactKernel(double signal_variance, double support_length);

  double signal_variance() const noexcept { return signal_variance_; }
  double support_length() const noexcept { return support_length_; }

  /// Covariance as a function of distance.
  double at_distance(double r) const noexcept;

  double operator()(const Point& a, const Point& b) const {
    return at_distance(distance(a, b));
  }

  /// Structural nonzero test; identical to operator() != 0.
  bool in_support(const Point& a, const Point& b) const {
    return distance(a, b) < support_length_;
  }

 private:
  double signal_variance_;
  double support_length_;
};

double kernel_eval(const CompactKernel& k, const Point& a, const Point& b);

/// Row-compressed sparse matrix holding exactly the structural nonzeros of a
/// covariance block. Columns within a row are sorted ascending.
class SparseCovariance {
 public:
  struct Entry {
    int col;
    double value;
  };

  SparseCovariance() = default;
  SparseCovariance(int rows, int cols);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept;

  /// Replaces row r; entries must be sorted by column with no duplicates.
  void set_row(int r, std::vector<Entry> entries);

  std::span<const Entry> row(int r) const { return data_.at(static_cast<std::size_t>(r)); }

  /// Column indices of the stored entries in row r.
  std::vector<int> row_pattern(int r) const;

  /// Stored value or 0.0 for a structural zero.
  double at(int r, int c) const;

  bool contains(int r, int c) const;

  /// y = A v, summing each row in ascending column order.
  Vector multiply(const Vector& v) const;

  /// Dense copy; limited to 64x64 so large problems never go through it.
  Matrix to_dense() const;

  Eigen::SparseMatrix<double> to_eigen() const;

  static constexpr int kDenseLimit = 64;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::vector<Entry>> data_;
};

/// K_ss: covariance among measurement locations.
SparseCovariance cov_train(const CompactKernel& k, std::span<const Point> locations);

/// K_Rs: rows are regression points, columns measurement locations.
SparseCovariance cov_cross(const CompactKernel& k, std::span<const Point> grid,
                           std::span<const Point> locations);

/// K_RR over the regression points.
SparseCovariance cov_grid(const CompactKernel& k, std::span<const Point> grid);

/// N^E_m: measurement indices with nonzero covariance to regression point m.
std::vector<int> effective_neighbors(const SparseCovariance& k_rs, int m);

/// True iff a Cholesky factorization of (c + jitter I) succeeds.
bool spd_check(const SparseCovariance& c, double jitter);

}  // namespace ebf
