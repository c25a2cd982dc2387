#pragma once

#include "ebf/dynamics.hpp"
#include "ebf/kernel.hpp"
#include "ebf/linalg.hpp"
#include "ebf/model.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ebf {

struct SolverSettings {
  double tol = 1e-8;          // projected-gradient infinity norm
  int max_iters = 200;
  int starts = 8;             // extra starts sampled uniformly in the domain
  std::uint64_t seed = 0;     // stream for the sampled starts
  double armijo_slope = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
};

struct FitDiagnostics {
  SolverSettings settings;
  std::string stop_reason;
  double gradient_norm = 0.0;
  int best_start = 0;
  int line_search_evaluations = 0;
  std::vector<Vector> iterates;       // accepted iterates, starting point first
  std::vector<double> cost_history;   // cost at each accepted iterate
};

struct MLResult {
  Hyperparameters gamma_ml;
  Vector z;         // (K_ss + D) z = mu_gamma - xbar
  Vector mu_gamma;  // mean at the measurement points
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  FitDiagnostics diagnostics;
};

/// Data of the ML problem: dynamics, K_ss and the sufficient statistics,
/// with K_ss + D factored once.
class MlProblem {
 public:
  MlProblem(const SpatialDynamics& dynamics, const CompactKernel& kernel, SufficientStats stats);

  const SpatialDynamics& dynamics() const noexcept { return *dynamics_; }
  const CompactKernel& kernel() const noexcept { return kernel_; }
  const SparseCovariance& k_ss() const noexcept { return k_ss_; }
  const SufficientStats& stats() const noexcept { return stats_; }
  const ShiftedFactor& factor() const noexcept { return *factor_; }

 private:
  const SpatialDynamics* dynamics_;
  CompactKernel kernel_;
  SparseCovariance k_ss_;
  SufficientStats stats_;
  std::shared_ptr<const ShiftedFactor> factor_;
};

struct QuadraticForm {
  double cost = 0.0;
  Vector z;
};

/// cost = r^T (K + D)^{-1} r evaluated as z^T (K + D) z with (K + D) z = r.
QuadraticForm quadratic_form(const SparseCovariance& k, const Vector& d, const ShiftedFactor& f,
                             const Vector& r);

struct CostEvaluation {
  double cost = 0.0;
  Vector z;
  Vector mu;
};

CostEvaluation ml_cost(const MlProblem& problem, const Vector& gamma);

/// 2 (d mu / d gamma)^T z.
Vector ml_gradient(const MlProblem& problem, const Vector& gamma);

/// Gradient with components zeroed where a bound is active and the
/// gradient points out of the domain.
Vector projected_gradient(const Vector& gradient, const Vector& gamma, const ParamBox& box);

/// Callbacks the Gauss-Newton driver needs; implemented centrally here and
/// over the simulated network in distnet.
class GaussNewtonModel {
 public:
  virtual ~GaussNewtonModel() = default;
  /// Cost at a trial point. The trial state is kept until the next call.
  virtual double evaluate(const Vector& gamma) = 0;
  /// Makes the last evaluated trial point the current point.
  virtual void commit() = 0;
  /// Gradient 2 J^T z and Gauss-Newton matrix J^T (K + D)^{-1} J at the
  /// current point.
  virtual void linearize(Vector& gradient, Matrix& gn_matrix) = 0;
};

struct GaussNewtonOutcome {
  Vector gamma;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  FitDiagnostics diagnostics;
};

/// Projected Gauss-Newton with Armijo backtracking on a box domain.
GaussNewtonOutcome gauss_newton(GaussNewtonModel& model, const Hyperparameters& init,
                                const SolverSettings& settings);

/// Single start. Linear-in-gamma dynamics are solved exactly through the
/// normal equations; otherwise projected Gauss-Newton.
MLResult fit_ml(const MlProblem& problem, const Hyperparameters& init,
                const SolverSettings& settings = {});

/// `init` followed by settings.starts points sampled uniformly in the
/// domain (unbounded components keep the init value).
std::vector<Vector> start_points(const Hyperparameters& init, const SolverSettings& settings);

/// fit_ml from every start point; lowest cost wins, ties to the lowest index.
MLResult fit_ml_multistart(const MlProblem& problem, const Hyperparameters& init,
                           const SolverSettings& settings = {});

struct Posterior {
  Vector prior_mean;   // mu^R at the ML hyperparameters
  Vector mean;         // MAP estimate
  Vector variance;     // diagonal of the posterior covariance
  Matrix covariance;   // full M x M covariance; empty when not computed
  Vector lower95;
  Vector upper95;
};

inline constexpr double kBand95 = 1.96;

/// Fills lower95/upper95 from mean and variance.
void fill_bounds(Posterior& post);

/// MAP mean mu^R - K_Rs z and covariance K_RR - K_Rs (K_ss + D)^{-1} K_sR,
/// using sparse solves per regression point.
Posterior map_posterior(const MlProblem& problem, const MLResult& ml, const RegressionGrid& grid);

/// Dense posterior over the repeated-point training set of all L raw
/// observations. Test and verification path only (L <= 200).
Posterior dense_posterior_oracle(const ObservationSet& obs, const CompactKernel& kernel,
                                 const SpatialDynamics& dynamics, const Vector& gamma,
                                 const RegressionGrid& grid);

inline constexpr int kDenseOracleLimit = 200;

}  // namespace ebf
