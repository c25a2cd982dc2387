#include "ebf/estimator.hpp"

#include "ebf/error.hpp"
#include "ebf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ebf {

MlProblem::MlProblem(const SpatialDynamics& dynamics, const CompactKernel& kernel,
                     SufficientStats stats)
    : dynamics_(&dynamics), kernel_(kernel), stats_(std::move(stats)) {
  const int n = dynamics.size();
  if (stats_.xbar.size() != n || stats_.d_diag.size() != n) {
    throw InvalidInput("sufficient statistics do not match the dynamics size");
  }
  if ((stats_.d_diag.array() <= 0.0).any()) {
    throw InvalidInput("noise diagonal D must be strictly positive");
  }
  k_ss_ = cov_train(kernel_, dynamics.locations());
  factor_ = std::make_shared<const ShiftedFactor>(k_ss_, stats_.d_diag);
}

QuadraticForm quadratic_form(const SparseCovariance& k, const Vector& d, const ShiftedFactor& f,
                             const Vector& r) {
  QuadraticForm q;
  q.z = f.solve(r);
  q.cost = q.z.dot(apply_shifted(k, d, q.z));
  return q;
}

CostEvaluation ml_cost(const MlProblem& problem, const Vector& gamma) {
  CostEvaluation e;
  e.mu = problem.dynamics().solve_mean(gamma);
  const QuadraticForm q = quadratic_form(problem.k_ss(), problem.stats().d_diag, problem.factor(),
                                         e.mu - problem.stats().xbar);
  e.cost = q.cost;
  e.z = q.z;
  return e;
}

Vector ml_gradient(const MlProblem& problem, const Vector& gamma) {
  const CostEvaluation e = ml_cost(problem, gamma);
  return 2.0 * problem.dynamics().mean_jacobian(gamma).transpose() * e.z;
}

Vector projected_gradient(const Vector& gradient, const Vector& gamma, const ParamBox& box) {
  Vector pg = gradient;
  for (Eigen::Index k = 0; k < pg.size(); ++k) {
    const bool at_lower = gamma[k] <= box.lower[k] && gradient[k] > 0.0;
    const bool at_upper = gamma[k] >= box.upper[k] && gradient[k] < 0.0;
    if (at_lower || at_upper) pg[k] = 0.0;
  }
  return pg;
}

namespace {

// Decreases predicted by the Gauss-Newton model below this fraction of the
// cost are indistinguishable from rounding in the cost itself.
constexpr double kRoundingDecrease = 1e-12;

Vector gauss_newton_step(const Vector& gradient, const Matrix& gn_matrix, const Vector& gamma,
                         const ParamBox& box) {
  const Eigen::Index p = gradient.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index k = 0; k < p; ++k) {
    const bool at_lower = gamma[k] <= box.lower[k] && gradient[k] > 0.0;
    const bool at_upper = gamma[k] >= box.upper[k] && gradient[k] < 0.0;
    if (!at_lower && !at_upper) free.push_back(k);
  }
  Vector step = Vector::Zero(p);
  if (free.empty()) return step;
  const auto nf = static_cast<Eigen::Index>(free.size());
  Matrix h(nf, nf);
  Vector rhs(nf);
  for (Eigen::Index a = 0; a < nf; ++a) {
    rhs[a] = -0.5 * gradient[free[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < nf; ++b) {
      h(a, b) = 0.5 * (gn_matrix(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]) +
                       gn_matrix(free[static_cast<std::size_t>(b)], free[static_cast<std::size_t>(a)]));
    }
  }
  // Tiny damping keeps rank-deficient linearizations (e.g. A = 0) solvable.
  const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  h.diagonal().array() += 1e-12 * scale;
  Eigen::LDLT<Matrix> ldlt(h);
  Vector reduced;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    reduced = ldlt.solve(rhs);
  } else {
    reduced = rhs / scale;  // steepest descent fallback
  }
  for (Eigen::Index a = 0; a < nf; ++a) step[free[static_cast<std::size_t>(a)]] = reduced[a];
  return step;
}

}  // namespace

GaussNewtonOutcome gauss_newton(GaussNewtonModel& model, const Hyperparameters& init,
                                const SolverSettings& settings) {
  const ParamBox& box = init.domain;
  if (box.size() != init.values.size()) throw InvalidInput("domain size does not match gamma");

  GaussNewtonOutcome out;
  out.diagnostics.settings = settings;
  Vector gamma = box.clamp(init.values);
  double cost = model.evaluate(gamma);
  if (!std::isfinite(cost)) throw SolverError("ML cost is not finite at the starting point");
  model.commit();
  out.diagnostics.iterates.push_back(gamma);
  out.diagnostics.cost_history.push_back(cost);

  Vector gradient;
  Matrix gn_matrix;
  for (;;) {
    model.linearize(gradient, gn_matrix);
    const Vector pg = projected_gradient(gradient, gamma, box);
    out.diagnostics.gradient_norm = pg.lpNorm<Eigen::Infinity>();
    if (out.diagnostics.gradient_norm <= settings.tol) {
      out.converged = true;
      out.diagnostics.stop_reason = "gradient tolerance";
      break;
    }
    if (out.iterations >= settings.max_iters) {
      out.diagnostics.stop_reason = "iteration limit";
      break;
    }
    const Vector step = gauss_newton_step(gradient, gn_matrix, gamma, box);
    const double predicted = -0.5 * gradient.dot(step);
    if (predicted <= kRoundingDecrease * (1.0 + std::abs(cost))) {
      out.converged = true;
      out.diagnostics.stop_reason = "predicted decrease below rounding";
      break;
    }

    bool accepted = false;
    double t = 1.0;
    for (int b = 0; b <= settings.max_backtracks; ++b, t *= settings.backtrack) {
      const Vector candidate = box.clamp(gamma + t * step);
      if (candidate == gamma) break;
      const double trial = model.evaluate(candidate);
      ++out.diagnostics.line_search_evaluations;
      if (std::isfinite(trial) &&
          trial <= cost + settings.armijo_slope * gradient.dot(candidate - gamma)) {
        model.commit();
        gamma = candidate;
        cost = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.diagnostics.stop_reason = "line search failed";
      break;
    }
    ++out.iterations;
    out.diagnostics.iterates.push_back(gamma);
    out.diagnostics.cost_history.push_back(cost);
  }
  out.gamma = gamma;
  out.cost = cost;
  return out;
}

namespace {

class CentralModel final : public GaussNewtonModel {
 public:
  explicit CentralModel(const MlProblem& problem) : problem_(problem) {}

  double evaluate(const Vector& gamma) override {
    trial_gamma_ = gamma;
    trial_ = ml_cost(problem_, gamma);
    return trial_.cost;
  }
  void commit() override {
    gamma_ = trial_gamma_;
    current_ = trial_;
  }
  void linearize(Vector& gradient, Matrix& gn_matrix) override {
    const Matrix jac = problem_.dynamics().mean_jacobian(gamma_);
    gradient = 2.0 * jac.transpose() * current_.z;
    gn_matrix = jac.transpose() * problem_.factor().solve(jac);
  }

  const CostEvaluation& current() const { return current_; }

 private:
  const MlProblem& problem_;
  Vector trial_gamma_;
  Vector gamma_;
  CostEvaluation trial_;
  CostEvaluation current_;
};

MLResult fit_linear(const MlProblem& problem, const Hyperparameters& init,
                    const SolverSettings& settings) {
  const Vector probe = Vector::Zero(init.values.size());
  const Matrix basis = problem.dynamics().mean_jacobian(probe);
  const Matrix weighted = problem.factor().solve(basis);
  const Matrix normal = basis.transpose() * weighted;
  const Vector rhs = weighted.transpose() * problem.stats().xbar;
  Eigen::LDLT<Matrix> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SolverError("normal equations are singular; the mean basis is rank deficient");
  }
  const Vector gamma = ldlt.solve(rhs);

  MLResult r;
  r.gamma_ml = {gamma, init.domain};
  const CostEvaluation e = ml_cost(problem, gamma);
  r.z = e.z;
  r.mu_gamma = e.mu;
  r.cost = e.cost;
  r.iterations = 0;
  r.converged = true;
  r.diagnostics.settings = settings;
  r.diagnostics.stop_reason = "normal equations";
  r.diagnostics.gradient_norm = (2.0 * basis.transpose() * e.z).lpNorm<Eigen::Infinity>();
  r.diagnostics.iterates = {gamma};
  r.diagnostics.cost_history = {e.cost};
  return r;
}

}  // namespace

MLResult fit_ml(const MlProblem& problem, const Hyperparameters& init,
                const SolverSettings& settings) {
  if (init.values.size() != problem.dynamics().num_params()) {
    throw InvalidInput("initial hyperparameters have the wrong length");
  }
  if (!init.domain.contains(init.values)) {
    throw InvalidInput("initial hyperparameters lie outside their domain");
  }
  const bool unbounded = (init.domain.lower.array() == -std::numeric_limits<double>::infinity()).all() &&
                         (init.domain.upper.array() == std::numeric_limits<double>::infinity()).all();
  if (problem.dynamics().linear_in_params() && unbounded) {
    return fit_linear(problem, init, settings);
  }

  CentralModel model(problem);
  GaussNewtonOutcome gn = gauss_newton(model, init, settings);
  MLResult r;
  r.gamma_ml = {gn.gamma, init.domain};
  r.z = model.current().z;
  r.mu_gamma = model.current().mu;
  r.cost = gn.cost;
  r.iterations = gn.iterations;
  r.converged = gn.converged;
  r.diagnostics = std::move(gn.diagnostics);
  return r;
}

std::vector<Vector> start_points(const Hyperparameters& init, const SolverSettings& settings) {
  std::vector<Vector> starts{init.values};
  CounterRng rng(CounterRng::derive(settings.seed, 0x57a27));
  for (int s = 0; s < settings.starts; ++s) {
    Vector g = init.values;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const double lo = init.domain.lower[k];
      const double hi = init.domain.upper[k];
      const double u = rng.uniform();
      if (std::isfinite(lo) && std::isfinite(hi)) g[k] = lo + (hi - lo) * u;
    }
    starts.push_back(g);
  }
  return starts;
}

MLResult fit_ml_multistart(const MlProblem& problem, const Hyperparameters& init,
                           const SolverSettings& settings) {
  if (problem.dynamics().linear_in_params()) return fit_ml(problem, init, settings);
  const auto starts = start_points(init, settings);
  MLResult best;
  bool have = false;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    MLResult r = fit_ml(problem, {starts[s], init.domain}, settings);
    if (!have || r.cost < best.cost) {
      best = std::move(r);
      best.diagnostics.best_start = static_cast<int>(s);
      have = true;
    }
  }
  return best;
}

void fill_bounds(Posterior& post) {
  const Vector sd = post.variance.cwiseMax(0.0).cwiseSqrt();
  post.lower95 = post.mean - kBand95 * sd;
  post.upper95 = post.mean + kBand95 * sd;
}

Posterior map_posterior(const MlProblem& problem, const MLResult& ml, const RegressionGrid& grid) {
  const auto& dyn = problem.dynamics();
  const int m_count = grid.size();
  const int n = dyn.size();
  if (ml.z.size() != n) throw InvalidInput("ML result does not match the problem size");

  Posterior post;
  post.prior_mean = dyn.regression_mean(ml.gamma_ml.values, grid);
  const SparseCovariance k_rs = cov_cross(problem.kernel(), grid.points, dyn.locations());
  const SparseCovariance k_rr = cov_grid(problem.kernel(), grid.points);

  post.mean.resize(m_count);
  Matrix k_sr = Matrix::Zero(n, m_count);
  for (int m = 0; m < m_count; ++m) {
    double correction = 0.0;
    for (const auto& e : k_rs.row(m)) {
      correction += e.value * ml.z[e.col];
      k_sr(e.col, m) = e.value;
    }
    post.mean[m] = post.prior_mean[m] - correction;
  }

  // Column m of `solved` is (K_ss + D)^{-1} K_sR e_m.
  const Matrix solved = problem.factor().solve(k_sr);
  post.covariance.resize(m_count, m_count);
  for (int m = 0; m < m_count; ++m) {
    for (int p = m; p < m_count; ++p) {
      double reduction = 0.0;
      for (const auto& e : k_rs.row(m)) reduction += e.value * solved(e.col, p);
      const double value = k_rr.at(m, p) - reduction;
      post.covariance(m, p) = value;
      post.covariance(p, m) = value;
    }
  }
  post.variance = post.covariance.diagonal();
  fill_bounds(post);
  return post;
}

Posterior dense_posterior_oracle(const ObservationSet& obs, const CompactKernel& kernel,
                                 const SpatialDynamics& dynamics, const Vector& gamma,
                                 const RegressionGrid& grid) {
  const int total = obs.total_observations();
  if (total > kDenseOracleLimit) {
    throw InvalidInput("dense posterior oracle limited to " + std::to_string(kDenseOracleLimit) +
                       " observations, got " + std::to_string(total));
  }
  if (obs.size() != dynamics.size()) throw InvalidInput("observations do not match the dynamics");

  // Repeated training points q and matching mean/observation vectors.
  std::vector<Point> q;
  Vector mu_rep(total), x(total);
  const Vector mu = dynamics.solve_mean(gamma);
  int row = 0;
  for (int i = 0; i < obs.size(); ++i) {
    const auto& s = obs.sensors[static_cast<std::size_t>(i)];
    for (double sample : s.observations) {
      q.push_back(s.location);
      mu_rep[row] = mu[i];
      x[row] = sample;
      ++row;
    }
  }
  const int m_count = grid.size();
  Matrix k_qq(total, total), k_rq(m_count, total), k_rr(m_count, m_count);
  for (int a = 0; a < total; ++a) {
    for (int b = 0; b < total; ++b) k_qq(a, b) = kernel(q[static_cast<std::size_t>(a)], q[static_cast<std::size_t>(b)]);
  }
  for (int m = 0; m < m_count; ++m) {
    for (int a = 0; a < total; ++a) {
      k_rq(m, a) = kernel(grid.points[static_cast<std::size_t>(m)], q[static_cast<std::size_t>(a)]);
    }
    for (int p = 0; p < m_count; ++p) {
      k_rr(m, p) = kernel(grid.points[static_cast<std::size_t>(m)], grid.points[static_cast<std::size_t>(p)]);
    }
  }
  const Matrix system = k_qq + obs.noise_variance * Matrix::Identity(total, total);
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) throw SolverError("dense posterior system is not SPD");

  Posterior post;
  post.prior_mean = dynamics.regression_mean(gamma, grid);
  post.mean = post.prior_mean - k_rq * llt.solve(mu_rep - x);
  post.covariance = k_rr - k_rq * llt.solve(k_rq.transpose());
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  post.variance = post.covariance.diagonal();
  fill_bounds(post);
  return post;
}

}  // namespace ebf
