#include "ebf/kernel.hpp"

#include "ebf/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ebf {

double distance(const Point& a, const Point& b) {
  if (a.size() != b.size()) {
    throw InvalidInput("coordinate dimension mismatch: " + std::to_string(a.size()) +
                       " vs " + std::to_string(b.size()));
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

CompactKernel::CompactKernel(double signal_variance, double support_length)
    : signal_variance_(signal_variance), support_length_(support_length) {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw InvalidInput("kernel signal variance must be positive and finite");
  }
  if (!(support_length > 0.0) || !std::isfinite(support_length)) {
    throw InvalidInput("kernel support length must be positive and finite");
  }
}

namespace {

// With x = 2 pi (1 - r/l) the bracket equals (1 - r/l) * sum_{k>=2}
// (-1)^k (2k - 2) x^{2k} / (3 (2k+1)!). Below this x the series is summed.
constexpr double kSeriesSwitch = 0.5;

double near_boundary(double delta) {
  const double x = 2.0 * std::numbers::pi * delta;
  const double x2 = x * x;
  double term = x2 * x2;  // x^{2k} for k = 2
  double factorial = 120.0;  // (2k+1)! for k = 2
  double sum = 0.0;
  for (int k = 2; k < 12; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    sum += sign * (2.0 * k - 2.0) * term / (3.0 * factorial);
    term *= x2;
    factorial *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
  }
  return delta * sum;
}

}  // namespace

double CompactKernel::at_distance(double r) const noexcept {
  if (!(r < support_length_)) return 0.0;
  const double u = r / support_length_;
  const double delta = 1.0 - u;
  if (2.0 * std::numbers::pi * delta < kSeriesSwitch) {
    return signal_variance_ * near_boundary(delta);
  }
  const double arg = 2.0 * std::numbers::pi * u;
  return signal_variance_ *
         ((2.0 + std::cos(arg)) / 3.0 * delta + std::sin(arg) / (2.0 * std::numbers::pi));
}

double kernel_eval(const CompactKernel& k, const Point& a, const Point& b) { return k(a, b); }

SparseCovariance::SparseCovariance(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows)) {
  if (rows < 0 || cols < 0) throw InvalidInput("negative matrix dimension");
}

std::size_t SparseCovariance::nnz() const noexcept {
  std::size_t n = 0;
  for (const auto& r : data_) n += r.size();
  return n;
}

void SparseCovariance::set_row(int r, std::vector<Entry> entries) {
  if (r < 0 || r >= rows_) throw InvalidInput("row index out of range");
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].col < 0 || entries[k].col >= cols_) {
      throw InvalidInput("column index out of range");
    }
    if (k > 0 && entries[k].col <= entries[k - 1].col) {
      throw InvalidInput("row entries must be strictly increasing in column");
    }
  }
  data_[static_cast<std::size_t>(r)] = std::move(entries);
}

std::vector<int> SparseCovariance::row_pattern(int r) const {
  std::vector<int> cols;
  for (const Entry& e : row(r)) cols.push_back(e.col);
  return cols;
}

double SparseCovariance::at(int r, int c) const {
  const auto entries = row(r);
  const auto it = std::lower_bound(entries.begin(), entries.end(), c,
                                   [](const Entry& e, int col) { return e.col < col; });
  return (it != entries.end() && it->col == c) ? it->value : 0.0;
}

bool SparseCovariance::contains(int r, int c) const {
  const auto entries = row(r);
  return std::binary_search(entries.begin(), entries.end(), Entry{c, 0.0},
                            [](const Entry& a, const Entry& b) { return a.col < b.col; });
}

Vector SparseCovariance::multiply(const Vector& v) const {
  if (v.size() != cols_) throw InvalidInput("matvec size mismatch");
  Vector y(rows_);
  for (int r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (const Entry& e : row(r)) acc += e.value * v[e.col];
    y[r] = acc;
  }
  return y;
}

Matrix SparseCovariance::to_dense() const {
  if (rows_ > kDenseLimit || cols_ > kDenseLimit) {
    throw InvalidInput("dense conversion refused above " + std::to_string(kDenseLimit) +
                       " rows/cols");
  }
  Matrix m = Matrix::Zero(rows_, cols_);
  for (int r = 0; r < rows_; ++r) {
    for (const Entry& e : row(r)) m(r, e.col) = e.value;
  }
  return m;
}

Eigen::SparseMatrix<double> SparseCovariance::to_eigen() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(nnz());
  for (int r = 0; r < rows_; ++r) {
    for (const Entry& e : row(r)) triplets.emplace_back(r, e.col, e.value);
  }
  Eigen::SparseMatrix<double> m(rows_, cols_);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

namespace {

SparseCovariance assemble(const CompactKernel& k, std::span<const Point> row_points,
                          std::span<const Point> col_points) {
  SparseCovariance c(static_cast<int>(row_points.size()), static_cast<int>(col_points.size()));
  for (std::size_t r = 0; r < row_points.size(); ++r) {
    std::vector<SparseCovariance::Entry> entries;
    for (std::size_t j = 0; j < col_points.size(); ++j) {
      const double r_dist = distance(row_points[r], col_points[j]);
      if (r_dist < k.support_length()) {
        entries.push_back({static_cast<int>(j), k.at_distance(r_dist)});
      }
    }
    c.set_row(static_cast<int>(r), std::move(entries));
  }
  return c;
}

}  // namespace

SparseCovariance cov_train(const CompactKernel& k, std::span<const Point> locations) {
  return assemble(k, locations, locations);
}

SparseCovariance cov_cross(const CompactKernel& k, std::span<const Point> grid,
                           std::span<const Point> locations) {
  return assemble(k, grid, locations);
}

SparseCovariance cov_grid(const CompactKernel& k, std::span<const Point> grid) {
  return assemble(k, grid, grid);
}

std::vector<int> effective_neighbors(const SparseCovariance& k_rs, int m) {
  return k_rs.row_pattern(m);
}

bool spd_check(const SparseCovariance& c, double jitter) {
  if (c.rows() != c.cols()) throw InvalidInput("spd_check requires a square matrix");
  if (c.rows() == 0) return true;
  Eigen::SparseMatrix<double> m = c.to_eigen();
  if (jitter != 0.0) {
    Eigen::SparseMatrix<double> id(c.rows(), c.cols());
    id.setIdentity();
    m = m + jitter * id;
  }
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace ebf
