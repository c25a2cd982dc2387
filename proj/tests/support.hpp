#pragma once

#include "ebf/dynamics.hpp"
#include "ebf/kernel.hpp"
#include "ebf/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

namespace ebf::test {

inline std::vector<Point> line_points(const std::vector<double>& xs) {
  std::vector<Point> out;
  for (double x : xs) out.push_back({x});
  return out;
}

inline std::vector<Point> uniform_points(int n, double lo, double hi) {
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) out.push_back({lo + (hi - lo) * i / (n - 1)});
  return out;
}

inline ObservationSet make_observations(const std::vector<Point>& locations,
                                        const std::vector<std::vector<double>>& samples,
                                        double noise_variance) {
  ObservationSet obs;
  obs.noise_variance = noise_variance;
  obs.dimension = static_cast<int>(locations.front().size());
  for (std::size_t i = 0; i < locations.size(); ++i) {
    obs.sensors.push_back({static_cast<int>(i) + 1, locations[i], samples[i]});
  }
  return obs;
}

// Kernel straight from its definition, in long double.
inline long double kernel_direct(long double sf2, long double ell, long double r) {
  if (r >= ell) return 0.0L;
  const long double pi = std::numbers::pi_v<long double>;
  const long double t = 2.0L * pi * r / ell;
  return sf2 * ((2.0L + std::cos(t)) / 3.0L * (1.0L - r / ell) + std::sin(t) / (2.0L * pi));
}

inline Matrix dense_kernel(const CompactKernel& k, const std::vector<Point>& a,
                           const std::vector<Point>& b) {
  Matrix m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(kernel_direct(k.signal_variance(), k.support_length(), distance(a[i], b[j])));
    }
  }
  return m;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Central differences of f: R^p -> R^n, column per parameter.
template <typename F>
Matrix central_jacobian(F&& f, const Vector& x, double step) {
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = step * std::max(1.0, std::abs(x[k]));
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    jac.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

// Random small problem for oracle comparisons.
struct SmallProblem {
  ObservationSet obs;
  CompactKernel kernel{1.0, 1.0};
  std::shared_ptr<SpatialDynamics> dynamics;
  Vector gamma;
  RegressionGrid grid;
};

inline SmallProblem random_small_problem(std::mt19937_64& gen, bool poisson, int max_n = 6) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); };
  auto ui = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  SmallProblem p;
  std::vector<Point> locs;
  double mean_gap;
  if (poisson) {
    const int n = ui(3, max_n);
    const double lo = u(-1.0, 1.0), h = u(0.2, 1.0);
    for (int i = 0; i < n; ++i) locs.push_back({lo + h * i});
    mean_gap = h;
    p.dynamics = std::make_shared<Poisson1D>(locs, u(-2.0, 2.0), u(-2.0, 2.0));
    p.gamma = Vector(3);
    p.gamma << u(0.0, 5.0), u(0.5, 3.0), u(-3.0, 3.0);
  } else {
    const int n = ui(2, max_n);
    double x = u(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
      locs.push_back({x});
      x += u(0.1, 1.5);
    }
    mean_gap = (locs.back()[0] - locs.front()[0]) / (n - 1);
    std::vector<double> knots;
    for (const auto& l : locs) knots.push_back(l[0]);
    std::shuffle(knots.begin(), knots.end(), gen);
    knots.resize(static_cast<std::size_t>(ui(2, n)));
    std::sort(knots.begin(), knots.end());
    p.dynamics = std::make_shared<NaturalSpline>(locs, knots);
    p.gamma = Vector(static_cast<Eigen::Index>(knots.size()));
    for (auto& g : p.gamma) g = u(-3.0, 3.0);
  }
  p.kernel = CompactKernel(u(0.5, 3.0), u(0.5, 3.0) * mean_gap);
  const Vector mu = p.dynamics->solve_mean(p.gamma);
  std::normal_distribution<double> n01;
  const double sigma2 = u(0.05, 1.0);
  std::vector<std::vector<double>> samples;
  for (std::size_t i = 0; i < locs.size(); ++i) {
    std::vector<double> s;
    const int l = ui(1, 4);
    for (int k = 0; k < l; ++k) s.push_back(mu[static_cast<Eigen::Index>(i)] + 0.7 * n01(gen));
    samples.push_back(s);
  }
  p.obs = make_observations(locs, samples, sigma2);
  const int m = ui(1, 8);
  for (int k = 0; k < m; ++k) p.grid.points.push_back({u(locs.front()[0], locs.back()[0])});
  p.grid.points.push_back(locs[static_cast<std::size_t>(ui(0, static_cast<int>(locs.size()) - 1))]);
  return p;
}

}  // namespace ebf::test
