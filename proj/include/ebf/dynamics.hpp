#pragma once

#include "ebf/model.hpp"
#include "ebf/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace ebf {

/// Box domain for the hyperparameters.
struct ParamBox {
  Vector lower;
  Vector upper;

  static ParamBox unbounded(int n);

  int size() const noexcept { return static_cast<int>(lower.size()); }
  bool contains(const Vector& gamma) const;
  Vector clamp(const Vector& gamma) const;
};

struct Hyperparameters {
  Vector values;
  ParamBox domain;
};

/// One coefficient of a linear system row.
struct SystemEntry {
  int col;
  double value;
};

/// Parametrized residual system F_i(mu; gamma) = 0 whose unique solution is
/// the GP mean at the measurement points.
///
/// Two families exist. Implicit models (explicit_mean() == false) define mu
/// through a sparse symmetric positive definite system A mu = b(gamma);
/// nodes know only their own row of A and b. Explicit models give
/// mu_i = mu(s_i; gamma) directly.
class SpatialDynamics {
 public:
  virtual ~SpatialDynamics() = default;

  virtual std::string name() const = 0;
  /// Number of measurement points N.
  virtual int size() const = 0;
  virtual int num_params() const = 0;
  virtual ParamBox default_domain() const = 0;
  virtual const std::vector<Point>& locations() const = 0;

  virtual double residual_at(int i, const Vector& mu, const Vector& gamma) const = 0;
  Vector residual(const Vector& mu, const Vector& gamma) const;
  /// N^mu_i, the indices F_i depends on (sorted, includes i).
  virtual std::vector<int> mean_neighbors(int i) const = 0;

  virtual Vector solve_mean(const Vector& gamma) const = 0;
  /// N x num_params matrix d mu / d gamma.
  virtual Matrix mean_jacobian(const Vector& gamma) const = 0;
  virtual Vector regression_mean(const Vector& gamma, const RegressionGrid& grid) const = 0;

  virtual bool explicit_mean() const = 0;
  virtual bool linear_in_params() const { return false; }

  // Explicit models.
  virtual double local_mean(int i, const Vector& gamma) const;
  virtual Vector local_mean_gradient(int i, const Vector& gamma) const;

  // Implicit models: row i of the SPD system A mu = b(gamma).
  virtual std::vector<SystemEntry> system_row(int i) const;
  virtual double system_rhs(int i, const Vector& gamma) const;
  virtual Vector system_rhs_gradient(int i, const Vector& gamma) const;

  /// Measurement indices whose mean values are needed to evaluate the
  /// regression mean at grid point m (empty for explicit models).
  virtual std::vector<int> regression_support(const RegressionGrid& grid, int m) const = 0;
  /// Regression mean at grid point m from gamma and the mean values at
  /// regression_support(grid, m), in that order. Agrees bit for bit with
  /// regression_mean(gamma, grid)[m].
  virtual double regression_mean_at(const RegressionGrid& grid, int m, const Vector& gamma,
                                    std::span<const double> support_mu) const = 0;
};

/// Discretized 1-D Poisson problem mu'' = w(s; gamma) on uniformly spaced
/// measurement points with Dirichlet boundary values and heat source
/// w(s; A, omega, phi) = -A omega^2 sin(omega s + phi).
class Poisson1D final : public SpatialDynamics {
 public:
  Poisson1D(std::vector<Point> locations, double w_first, double w_last);

  static double source(double s, const Vector& gamma);
  /// (dw/dA, dw/domega, dw/dphi) at s.
  static Vector source_gradient(double s, const Vector& gamma);

  double spacing() const noexcept { return spacing_; }
  double w_first() const noexcept { return w_first_; }
  double w_last() const noexcept { return w_last_; }

  std::string name() const override { return "poisson1d"; }
  int size() const override { return static_cast<int>(locations_.size()); }
  int num_params() const override { return 3; }
  ParamBox default_domain() const override;
  const std::vector<Point>& locations() const override { return locations_; }

  double residual_at(int i, const Vector& mu, const Vector& gamma) const override;
  std::vector<int> mean_neighbors(int i) const override;

  Vector solve_mean(const Vector& gamma) const override;
  Matrix mean_jacobian(const Vector& gamma) const override;
  Vector regression_mean(const Vector& gamma, const RegressionGrid& grid) const override;

  bool explicit_mean() const override { return false; }

  std::vector<SystemEntry> system_row(int i) const override;
  double system_rhs(int i, const Vector& gamma) const override;
  Vector system_rhs_gradient(int i, const Vector& gamma) const override;

  std::vector<int> regression_support(const RegressionGrid& grid, int m) const override;
  double regression_mean_at(const RegressionGrid& grid, int m, const Vector& gamma,
                            std::span<const double> support_mu) const override;

 private:
  // Left endpoint index of the interval holding s; the last interval is
  // closed on the right.
  int interval_of(double s) const;
  // Exact measurement index at s, or -1.
  int node_at(double s) const;
  // Values at the given strictly interior points of interval [s_i, s_{i+1}].
  Vector interval_solve(int i, double mu_left, double mu_right, const Vector& gamma,
                        std::span<const double> interior) const;
  std::vector<double> interval_points(const RegressionGrid& grid, int i) const;

  std::vector<Point> locations_;
  std::vector<double> coords_;
  double w_first_;
  double w_last_;
  double spacing_;
};

/// Mean linear in gamma: mu(s) = b(s) . gamma, with a fixed basis.
class LinearMean : public SpatialDynamics {
 public:
  explicit LinearMean(std::vector<Point> locations);

  virtual Vector basis(const Point& s) const = 0;

  int size() const override { return static_cast<int>(locations_.size()); }
  ParamBox default_domain() const override { return ParamBox::unbounded(num_params()); }
  const std::vector<Point>& locations() const override { return locations_; }

  double residual_at(int i, const Vector& mu, const Vector& gamma) const override;
  std::vector<int> mean_neighbors(int i) const override { return {i}; }

  Vector solve_mean(const Vector& gamma) const override;
  Matrix mean_jacobian(const Vector& gamma) const override;
  Vector regression_mean(const Vector& gamma, const RegressionGrid& grid) const override;

  bool explicit_mean() const override { return true; }
  bool linear_in_params() const override { return true; }
  double local_mean(int i, const Vector& gamma) const override;
  Vector local_mean_gradient(int i, const Vector& gamma) const override;

  std::vector<int> regression_support(const RegressionGrid&, int) const override { return {}; }
  double regression_mean_at(const RegressionGrid& grid, int m, const Vector& gamma,
                            std::span<const double> support_mu) const override;

  /// Basis rows at the measurement points (N x num_params).
  const Matrix& train_basis() const;

 protected:
  void cache_train_basis();

 private:
  std::vector<Point> locations_;
  Matrix train_basis_;
};

/// Natural cubic spline through (c_j, gamma_j); outside [c_1, c_Q] the end
/// cubic pieces extend.
class NaturalSpline final : public LinearMean {
 public:
  NaturalSpline(std::vector<Point> locations, std::vector<double> knots);

  std::string name() const override { return "natural_spline"; }
  int num_params() const override { return static_cast<int>(knots_.size()); }
  const std::vector<double>& knots() const noexcept { return knots_; }

  Vector basis(const Point& s) const override;

 private:
  std::vector<double> knots_;
  Matrix curvature_;  // gamma -> second derivatives at the knots
};

/// mu(s) = gamma, a single unknown level.
class ConstantMean final : public LinearMean {
 public:
  explicit ConstantMean(std::vector<Point> locations);

  std::string name() const override { return "constant"; }
  int num_params() const override { return 1; }
  Vector basis(const Point& s) const override;
};

}  // namespace ebf
