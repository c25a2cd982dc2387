#include "ebf/dynamics.hpp"

#include "ebf/error.hpp"
#include "ebf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ebf {

ParamBox ParamBox::unbounded(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
}

bool ParamBox::contains(const Vector& gamma) const {
  if (gamma.size() != lower.size()) return false;
  for (Eigen::Index k = 0; k < gamma.size(); ++k) {
    if (!(gamma[k] >= lower[k] && gamma[k] <= upper[k])) return false;
  }
  return true;
}

Vector ParamBox::clamp(const Vector& gamma) const {
  if (gamma.size() != lower.size()) throw InvalidInput("hyperparameter size mismatch");
  return gamma.cwiseMax(lower).cwiseMin(upper);
}

Vector SpatialDynamics::residual(const Vector& mu, const Vector& gamma) const {
  Vector f(size());
  for (int i = 0; i < size(); ++i) f[i] = residual_at(i, mu, gamma);
  return f;
}

double SpatialDynamics::local_mean(int, const Vector&) const {
  throw InvalidInput(name() + " has no explicit mean");
}

Vector SpatialDynamics::local_mean_gradient(int, const Vector&) const {
  throw InvalidInput(name() + " has no explicit mean");
}

std::vector<SystemEntry> SpatialDynamics::system_row(int) const {
  throw InvalidInput(name() + " does not define its mean through a linear system");
}

double SpatialDynamics::system_rhs(int, const Vector&) const {
  throw InvalidInput(name() + " does not define its mean through a linear system");
}

Vector SpatialDynamics::system_rhs_gradient(int, const Vector&) const {
  throw InvalidInput(name() + " does not define its mean through a linear system");
}

namespace {

std::vector<double> scalar_coords(const std::vector<Point>& points, const char* what) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (p.size() != 1) {
      throw InvalidInput(std::string(what) + " requires 1-D locations, got dimension " +
                         std::to_string(p.size()));
    }
    out.push_back(p[0]);
  }
  return out;
}

void require_params(const Vector& gamma, int n) {
  if (gamma.size() != n) {
    throw InvalidInput("expected " + std::to_string(n) + " hyperparameters, got " +
                       std::to_string(gamma.size()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Poisson1D

Poisson1D::Poisson1D(std::vector<Point> locations, double w_first, double w_last)
    : locations_(std::move(locations)), w_first_(w_first), w_last_(w_last) {
  coords_ = scalar_coords(locations_, "Poisson1D");
  const auto n = coords_.size();
  if (n < 3) throw InvalidInput("Poisson1D needs at least 3 measurement points");
  spacing_ = (coords_.back() - coords_.front()) / static_cast<double>(n - 1);
  if (!(spacing_ > 0.0)) throw InvalidInput("Poisson1D locations must be increasing");
  for (std::size_t i = 1; i < n; ++i) {
    const double h = coords_[i] - coords_[i - 1];
    if (std::abs(h - spacing_) > 1e-9 * spacing_) {
      throw InvalidInput("Poisson1D locations must be uniformly spaced (interval " +
                         std::to_string(i) + " differs)");
    }
  }
}

double Poisson1D::source(double s, const Vector& gamma) {
  require_params(gamma, 3);
  const double amp = gamma[0], omega = gamma[1], phase = gamma[2];
  return -amp * omega * omega * std::sin(omega * s + phase);
}

Vector Poisson1D::source_gradient(double s, const Vector& gamma) {
  require_params(gamma, 3);
  const double amp = gamma[0], omega = gamma[1], phase = gamma[2];
  const double sn = std::sin(omega * s + phase);
  const double cs = std::cos(omega * s + phase);
  Vector g(3);
  g[0] = -omega * omega * sn;
  g[1] = -2.0 * amp * omega * sn - amp * omega * omega * s * cs;
  g[2] = -amp * omega * omega * cs;
  return g;
}

ParamBox Poisson1D::default_domain() const {
  ParamBox box;
  box.lower = Vector(3);
  box.upper = Vector(3);
  box.lower << 0.0, 0.1, -std::numbers::pi;
  box.upper << 20.0, 10.0, std::numbers::pi;
  return box;
}

double Poisson1D::residual_at(int i, const Vector& mu, const Vector& gamma) const {
  const int n = size();
  if (mu.size() != n) throw InvalidInput("mean vector has wrong length");
  if (i == 0) return mu[0] - w_first_;
  if (i == n - 1) return mu[n - 1] - w_last_;
  const double lap = (mu[i + 1] - 2.0 * mu[i] + mu[i - 1]) / (spacing_ * spacing_);
  return lap - source(coords_[static_cast<std::size_t>(i)], gamma);
}

std::vector<int> Poisson1D::mean_neighbors(int i) const {
  if (i == 0 || i == size() - 1) return {i};
  return {i - 1, i, i + 1};
}

Vector Poisson1D::solve_mean(const Vector& gamma) const {
  require_params(gamma, 3);
  const int n = size();
  Vector lower = Vector::Ones(n), diag = Vector::Constant(n, -2.0), upper = Vector::Ones(n);
  Vector rhs(n);
  lower[0] = upper[0] = 0.0;
  diag[0] = 1.0;
  lower[n - 1] = upper[n - 1] = 0.0;
  diag[n - 1] = 1.0;
  rhs[0] = w_first_;
  rhs[n - 1] = w_last_;
  const double eps2 = spacing_ * spacing_;
  for (int i = 1; i < n - 1; ++i) rhs[i] = eps2 * source(coords_[static_cast<std::size_t>(i)], gamma);
  return solve_tridiagonal(lower, diag, upper, rhs);
}

Matrix Poisson1D::mean_jacobian(const Vector& gamma) const {
  require_params(gamma, 3);
  const int n = size();
  Vector lower = Vector::Ones(n), diag = Vector::Constant(n, -2.0), upper = Vector::Ones(n);
  lower[0] = upper[0] = 0.0;
  diag[0] = 1.0;
  lower[n - 1] = upper[n - 1] = 0.0;
  diag[n - 1] = 1.0;
  const double eps2 = spacing_ * spacing_;
  Matrix rhs = Matrix::Zero(n, 3);
  for (int i = 1; i < n - 1; ++i) {
    rhs.row(i) = eps2 * source_gradient(coords_[static_cast<std::size_t>(i)], gamma).transpose();
  }
  Matrix jac(n, 3);
  for (int k = 0; k < 3; ++k) jac.col(k) = solve_tridiagonal(lower, diag, upper, rhs.col(k));
  return jac;
}

std::vector<SystemEntry> Poisson1D::system_row(int i) const {
  const int n = size();
  if (i < 0 || i >= n) throw InvalidInput("row index out of range");
  if (i == 0 || i == n - 1) return {{i, 1.0}};
  // Interior rows of -(second difference) with boundary values eliminated.
  std::vector<SystemEntry> row;
  if (i - 1 > 0) row.push_back({i - 1, -1.0});
  row.push_back({i, 2.0});
  if (i + 1 < n - 1) row.push_back({i + 1, -1.0});
  return row;
}

double Poisson1D::system_rhs(int i, const Vector& gamma) const {
  const int n = size();
  if (i == 0) return w_first_;
  if (i == n - 1) return w_last_;
  double rhs = -spacing_ * spacing_ * source(coords_[static_cast<std::size_t>(i)], gamma);
  if (i - 1 == 0) rhs += w_first_;
  if (i + 1 == n - 1) rhs += w_last_;
  return rhs;
}

Vector Poisson1D::system_rhs_gradient(int i, const Vector& gamma) const {
  const int n = size();
  if (i == 0 || i == n - 1) return Vector::Zero(3);
  return -spacing_ * spacing_ * source_gradient(coords_[static_cast<std::size_t>(i)], gamma);
}

int Poisson1D::node_at(double s) const {
  const auto it = std::lower_bound(coords_.begin(), coords_.end(), s);
  if (it != coords_.end() && *it == s) return static_cast<int>(it - coords_.begin());
  return -1;
}

int Poisson1D::interval_of(double s) const {
  if (s < coords_.front() || s > coords_.back()) {
    throw InvalidInput("regression point " + std::to_string(s) + " lies outside [" +
                       std::to_string(coords_.front()) + ", " + std::to_string(coords_.back()) +
                       "]");
  }
  const auto it = std::upper_bound(coords_.begin(), coords_.end(), s);
  const int right = static_cast<int>(it - coords_.begin());
  return std::min(right - 1, size() - 2);
}

std::vector<double> Poisson1D::interval_points(const RegressionGrid& grid, int i) const {
  const double left = coords_[static_cast<std::size_t>(i)];
  const double right = coords_[static_cast<std::size_t>(i) + 1];
  std::vector<double> pts;
  for (const auto& p : grid.points) {
    if (p.size() != 1) throw InvalidInput("Poisson1D regression grid must be 1-D");
    if (p[0] > left && p[0] < right) pts.push_back(p[0]);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

Vector Poisson1D::interval_solve(int i, double mu_left, double mu_right, const Vector& gamma,
                                 std::span<const double> interior) const {
  const auto k = static_cast<Eigen::Index>(interior.size());
  if (k == 0) return Vector();
  const double left = coords_[static_cast<std::size_t>(i)];
  const double right = coords_[static_cast<std::size_t>(i) + 1];
  Vector lower(k), diag(k), upper(k), rhs(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double t = interior[static_cast<std::size_t>(j)];
    const double prev = (j == 0) ? left : interior[static_cast<std::size_t>(j) - 1];
    const double next = (j + 1 == k) ? right : interior[static_cast<std::size_t>(j) + 1];
    const double hl = t - prev;
    const double hr = next - t;
    const double a = 2.0 / (hl * (hl + hr));
    const double c = 2.0 / (hr * (hl + hr));
    lower[j] = a;
    upper[j] = c;
    diag[j] = -(a + c);
    rhs[j] = source(t, gamma);
    if (j == 0) rhs[j] -= a * mu_left;
    if (j + 1 == k) rhs[j] -= c * mu_right;
  }
  return solve_tridiagonal(lower, diag, upper, rhs);
}

Vector Poisson1D::regression_mean(const Vector& gamma, const RegressionGrid& grid) const {
  const Vector mu = solve_mean(gamma);
  const int m_count = grid.size();
  Vector out(m_count);
  // Interval solves are shared by all grid points in the same interval.
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(size() - 1));
  std::vector<Vector> vals(static_cast<std::size_t>(size() - 1));
  std::vector<bool> done(static_cast<std::size_t>(size() - 1), false);
  for (int m = 0; m < m_count; ++m) {
    const auto& p = grid.points[static_cast<std::size_t>(m)];
    if (p.size() != 1) throw InvalidInput("Poisson1D regression grid must be 1-D");
    const int node = node_at(p[0]);
    if (node >= 0) {
      out[m] = mu[node];
      continue;
    }
    const auto i = static_cast<std::size_t>(interval_of(p[0]));
    if (!done[i]) {
      pts[i] = interval_points(grid, static_cast<int>(i));
      vals[i] = interval_solve(static_cast<int>(i), mu[static_cast<Eigen::Index>(i)],
                               mu[static_cast<Eigen::Index>(i) + 1], gamma, pts[i]);
      done[i] = true;
    }
    const auto pos = std::lower_bound(pts[i].begin(), pts[i].end(), p[0]) - pts[i].begin();
    out[m] = vals[i][pos];
  }
  return out;
}

std::vector<int> Poisson1D::regression_support(const RegressionGrid& grid, int m) const {
  const auto& p = grid.points.at(static_cast<std::size_t>(m));
  if (p.size() != 1) throw InvalidInput("Poisson1D regression grid must be 1-D");
  const int node = node_at(p[0]);
  if (node >= 0) return {node};
  const int i = interval_of(p[0]);
  return {i, i + 1};
}

double Poisson1D::regression_mean_at(const RegressionGrid& grid, int m, const Vector& gamma,
                                     std::span<const double> support_mu) const {
  const auto& p = grid.points.at(static_cast<std::size_t>(m));
  const auto support = regression_support(grid, m);
  if (support_mu.size() != support.size()) {
    throw InvalidInput("regression_mean_at: expected " + std::to_string(support.size()) +
                       " support values");
  }
  if (support.size() == 1) return support_mu[0];
  const int i = support[0];
  const auto pts = interval_points(grid, i);
  const Vector vals = interval_solve(i, support_mu[0], support_mu[1], gamma, pts);
  const auto pos = std::lower_bound(pts.begin(), pts.end(), p[0]) - pts.begin();
  return vals[pos];
}

// ---------------------------------------------------------------------------
// LinearMean

LinearMean::LinearMean(std::vector<Point> locations) : locations_(std::move(locations)) {
  if (locations_.empty()) throw InvalidInput("mean model needs at least one location");
}

void LinearMean::cache_train_basis() {
  train_basis_.resize(size(), num_params());
  for (int i = 0; i < size(); ++i) {
    train_basis_.row(i) = basis(locations_[static_cast<std::size_t>(i)]).transpose();
  }
}

const Matrix& LinearMean::train_basis() const { return train_basis_; }

double LinearMean::residual_at(int i, const Vector& mu, const Vector& gamma) const {
  require_params(gamma, num_params());
  if (mu.size() != size()) throw InvalidInput("mean vector has wrong length");
  return mu[i] - train_basis_.row(i).dot(gamma);
}

Vector LinearMean::solve_mean(const Vector& gamma) const {
  require_params(gamma, num_params());
  return train_basis_ * gamma;
}

Matrix LinearMean::mean_jacobian(const Vector& gamma) const {
  require_params(gamma, num_params());
  return train_basis_;
}

Vector LinearMean::regression_mean(const Vector& gamma, const RegressionGrid& grid) const {
  require_params(gamma, num_params());
  Vector out(grid.size());
  for (int m = 0; m < grid.size(); ++m) {
    out[m] = basis(grid.points[static_cast<std::size_t>(m)]).dot(gamma);
  }
  return out;
}

double LinearMean::local_mean(int i, const Vector& gamma) const {
  require_params(gamma, num_params());
  return train_basis_.row(i).dot(gamma);
}

Vector LinearMean::local_mean_gradient(int i, const Vector&) const {
  return train_basis_.row(i).transpose();
}

double LinearMean::regression_mean_at(const RegressionGrid& grid, int m, const Vector& gamma,
                                      std::span<const double>) const {
  require_params(gamma, num_params());
  return basis(grid.points.at(static_cast<std::size_t>(m))).dot(gamma);
}

// ---------------------------------------------------------------------------
// NaturalSpline

NaturalSpline::NaturalSpline(std::vector<Point> locations, std::vector<double> knots)
    : LinearMean(std::move(locations)), knots_(std::move(knots)) {
  scalar_coords(this->locations(), "NaturalSpline");
  const auto q = static_cast<Eigen::Index>(knots_.size());
  if (q < 2) throw InvalidInput("natural spline needs at least 2 control points");
  for (Eigen::Index j = 1; j < q; ++j) {
    if (!(knots_[static_cast<std::size_t>(j)] > knots_[static_cast<std::size_t>(j) - 1])) {
      throw InvalidInput("spline control points must be distinct and increasing");
    }
  }

  // Second derivatives at the knots are linear in gamma: M = curvature_ * gamma,
  // with M_1 = M_Q = 0 (natural end conditions).
  curvature_ = Matrix::Zero(q, q);
  if (q > 2) {
    const Eigen::Index m = q - 2;
    Vector lower(m), diag(m), upper(m);
    auto h = [&](Eigen::Index j) {
      return knots_[static_cast<std::size_t>(j) + 1] - knots_[static_cast<std::size_t>(j)];
    };
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index j = r + 1;
      lower[r] = h(j - 1);
      diag[r] = 2.0 * (h(j - 1) + h(j));
      upper[r] = h(j);
    }
    for (Eigen::Index k = 0; k < q; ++k) {
      Vector rhs = Vector::Zero(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index j = r + 1;
        const double e_prev = (k == j - 1) ? 1.0 : 0.0;
        const double e_here = (k == j) ? 1.0 : 0.0;
        const double e_next = (k == j + 1) ? 1.0 : 0.0;
        rhs[r] = 6.0 * ((e_next - e_here) / h(j) - (e_here - e_prev) / h(j - 1));
      }
      curvature_.col(k).segment(1, m) = solve_tridiagonal(lower, diag, upper, rhs);
    }
  }
  cache_train_basis();
}

Vector NaturalSpline::basis(const Point& s) const {
  if (s.size() != 1) throw InvalidInput("natural spline is defined for 1-D points");
  const auto q = static_cast<Eigen::Index>(knots_.size());
  const double x = s[0];
  Eigen::Index j = 0;
  if (x >= knots_.back()) {
    j = q - 2;
  } else if (x >= knots_.front()) {
    j = (std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
  }
  const double left = knots_[static_cast<std::size_t>(j)];
  const double right = knots_[static_cast<std::size_t>(j) + 1];
  const double h = right - left;
  const double a = (right - x) / h;
  const double b = 1.0 - a;
  Vector out = ((a * a * a - a) * curvature_.row(j) + (b * b * b - b) * curvature_.row(j + 1))
                   .transpose() *
               (h * h / 6.0);
  out[j] += a;
  out[j + 1] += b;
  return out;
}

// ---------------------------------------------------------------------------
// ConstantMean

ConstantMean::ConstantMean(std::vector<Point> locations) : LinearMean(std::move(locations)) {
  cache_train_basis();
}

Vector ConstantMean::basis(const Point&) const { return Vector::Ones(1); }

}  // namespace ebf
