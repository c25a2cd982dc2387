#include "ebf/dynamics.hpp"
#include "ebf/error.hpp"
#include "ebf/linalg.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace ebf;
using test::line_points;
using test::uniform_points;

namespace {

Vector gamma3(double a, double w, double p) {
  Vector g(3);
  g << a, w, p;
  return g;
}

const double kPi = std::numbers::pi;

// Closed-form field for the temperature setup on [0, 2 pi / 3].
double heat_field(double s) {
  const double c1 = -9.0 / (2.0 * kPi);
  const double c0 = 3.0 - 6.0 * std::sin(3.0);
  return 6.0 * std::sin(3.0 * s + 3.0) + c1 * s + c0;
}

RegressionGrid dense_grid(double lo, double hi, int m) {
  RegressionGrid g;
  for (int k = 0; k < m; ++k) g.points.push_back({lo + (hi - lo) * k / (m - 1)});
  g.points.back() = {hi};
  return g;
}

}  // namespace

TEST_CASE("tridiagonal solve agrees with a dense solve") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 9;
  Vector lo(n), di(n), up(n), rhs(n);
  Matrix dense = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    lo[i] = u(gen);
    up[i] = u(gen);
    di[i] = 4.0 + u(gen);
    rhs[i] = u(gen);
    dense(i, i) = di[i];
    if (i > 0) dense(i, i - 1) = lo[i];
    if (i + 1 < n) dense(i, i + 1) = up[i];
  }
  const Vector x = solve_tridiagonal(lo, di, up, rhs);
  CHECK((dense * x - rhs).lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK_THROWS_AS(solve_tridiagonal(Vector::Zero(2), Vector::Zero(2), Vector::Zero(2), Vector::Ones(2)),
                  SolverError);
}

TEST_CASE("Poisson1D residual") {
  SUBCASE("linear function with zero source") {
    const Poisson1D p(line_points({0.0, 1.0, 2.0}), 0.0, 2.0);
    const Vector f = p.residual(Vector::LinSpaced(3, 0.0, 2.0), gamma3(0.0, 1.0, 0.0));
    CHECK(f.lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("constant solves Laplace") {
    const Poisson1D p(uniform_points(6, 0.0, 1.0), 1.0, 1.0);
    CHECK(p.residual(Vector::Ones(6), gamma3(0.0, 2.0, 0.5)).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  SUBCASE("exact discrete solution") {
    const Poisson1D p(uniform_points(10, 0.0, 2.0 * kPi / 3.0), 3.0, 0.0);
    const Vector g = gamma3(6.0, 3.0, 3.0);
    CHECK(p.residual(p.solve_mean(g), g).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  SUBCASE("stencil neighborhoods") {
    const Poisson1D p(uniform_points(5, 0.0, 1.0), 0.0, 0.0);
    CHECK(p.mean_neighbors(0) == std::vector<int>{0});
    CHECK(p.mean_neighbors(2) == std::vector<int>{1, 2, 3});
    CHECK(p.mean_neighbors(4) == std::vector<int>{4});
  }
}

TEST_CASE("Poisson1D construction errors") {
  CHECK_THROWS_AS(Poisson1D(line_points({0.0, 1.0}), 0.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(Poisson1D(line_points({0.0, 1.0, 3.0}), 0.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(Poisson1D({{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}}, 0.0, 0.0), InvalidInput);
}

TEST_CASE("Poisson1D solve_mean") {
  SUBCASE("zero source gives the linear interpolant") {
    const Poisson1D p(uniform_points(7, 1.0, 4.0), 2.0, -1.0);
    const Vector mu = p.solve_mean(gamma3(0.0, 1.0, 0.0));
    for (int i = 0; i < 7; ++i) CHECK(mu[i] == doctest::Approx(2.0 - 3.0 * i / 6.0).epsilon(1e-14));
  }
  SUBCASE("boundary values are exact") {
    const Poisson1D p(uniform_points(10, 0.0, 2.0 * kPi / 3.0), 3.0, 0.0);
    const Vector mu = p.solve_mean(gamma3(6.0, 3.0, 3.0));
    CHECK(mu[0] == 3.0);
    CHECK(mu[9] == 0.0);
  }
  SUBCASE("second-order agreement with the closed form") {
    double prev = 0.0;
    for (int n : {11, 21, 41, 81}) {
      const Poisson1D p(uniform_points(n, 0.0, 2.0 * kPi / 3.0), 3.0, 0.0);
      const Vector mu = p.solve_mean(gamma3(6.0, 3.0, 3.0));
      double err = 0.0;
      for (int i = 0; i < n; ++i) err = std::max(err, std::abs(mu[i] - heat_field(p.locations()[static_cast<std::size_t>(i)][0])));
      if (prev > 0.0) CHECK(std::log2(prev / err) >= 1.9);
      prev = err;
    }
  }
}

TEST_CASE("Poisson1D Jacobian") {
  const Poisson1D p(uniform_points(10, 0.0, 2.0 * kPi / 3.0), 3.0, 0.0);
  SUBCASE("matches central differences") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> ua(0.5, 10.0), uw(0.5, 5.0), up(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
      const Vector g = gamma3(ua(gen), uw(gen), up(gen));
      const Matrix jac = p.mean_jacobian(g);
      const Matrix fd = test::central_jacobian([&](const Vector& x) { return p.solve_mean(x); }, g, 1e-6);
      CHECK(test::max_abs(jac - fd) <= 1e-5 * std::max(1.0, test::max_abs(fd)));
    }
  }
  SUBCASE("zero amplitude") {
    const Matrix jac = p.mean_jacobian(gamma3(0.0, 3.0, 3.0));
    CHECK(jac.col(0).lpNorm<Eigen::Infinity>() > 0.0);
    CHECK(jac.col(1).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(jac.col(2).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("boundary rows vanish") {
    const Matrix jac = p.mean_jacobian(gamma3(6.0, 3.0, 3.0));
    CHECK(jac.row(0).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(jac.row(9).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("Poisson1D node-local system rows reproduce solve_mean") {
  const Poisson1D p(uniform_points(8, 0.0, 2.0), 1.5, -0.5);
  const Vector g = gamma3(2.0, 1.7, 0.4);
  const Vector mu = p.solve_mean(g);
  for (int i = 0; i < p.size(); ++i) {
    double lhs = 0.0;
    for (const auto& e : p.system_row(i)) {
      CHECK(std::abs(e.col - i) <= 1);
      lhs += e.value * mu[e.col];
    }
    CHECK(lhs == doctest::Approx(p.system_rhs(i, g)).epsilon(1e-12));
  }
  // Symmetric rows: the distributed solver relies on it.
  for (int i = 0; i < p.size(); ++i) {
    for (const auto& e : p.system_row(i)) {
      const auto back = p.system_row(e.col);
      const auto it = std::find_if(back.begin(), back.end(), [&](const SystemEntry& b) { return b.col == i; });
      REQUIRE(it != back.end());
      CHECK(it->value == e.value);
    }
  }
}

TEST_CASE("Poisson1D regression mean") {
  const Poisson1D p(uniform_points(10, 0.0, 2.0 * kPi / 3.0), 3.0, 0.0);
  const Vector g = gamma3(6.0, 3.0, 3.0);
  SUBCASE("grid on the measurement points") {
    const RegressionGrid grid{p.locations()};
    const Vector r = p.regression_mean(g, grid);
    const Vector mu = p.solve_mean(g);
    CHECK((r - mu).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
  SUBCASE("zero source interpolates linearly") {
    const RegressionGrid grid = dense_grid(0.0, 2.0 * kPi / 3.0, 37);
    const Vector r = p.regression_mean(gamma3(0.0, 3.0, 3.0), grid);
    for (int m = 0; m < grid.size(); ++m) {
      const double s = grid.points[static_cast<std::size_t>(m)][0];
      CHECK(r[m] == doctest::Approx(3.0 - 3.0 * s / (2.0 * kPi / 3.0)).epsilon(1e-12));
    }
  }
  SUBCASE("node-local evaluation is bitwise identical") {
    const RegressionGrid grid = dense_grid(0.0, 2.0 * kPi / 3.0, 53);
    const Vector r = p.regression_mean(g, grid);
    const Vector mu = p.solve_mean(g);
    for (int m = 0; m < grid.size(); ++m) {
      std::vector<double> support;
      for (int j : p.regression_support(grid, m)) support.push_back(mu[j]);
      CHECK(p.regression_mean_at(grid, m, g, support) == r[m]);
    }
  }
  SUBCASE("points outside the domain") {
    CHECK_THROWS_AS(p.regression_mean(g, RegressionGrid{line_points({-0.1})}), InvalidInput);
  }
  SUBCASE("refinement order at least 1.9") {
    const RegressionGrid grid = dense_grid(0.0, 2.0 * kPi / 3.0, 301);
    std::vector<double> errs;
    for (int n : {10, 19, 37}) {
      const Poisson1D q(uniform_points(n, 0.0, 2.0 * kPi / 3.0), 3.0, 0.0);
      const Vector r = q.regression_mean(g, grid);
      double err = 0.0;
      for (int m = 0; m < grid.size(); ++m) err = std::max(err, std::abs(r[m] - heat_field(grid.points[static_cast<std::size_t>(m)][0])));
      errs.push_back(err);
    }
    CHECK(std::log2(errs[0] / errs[1]) >= 1.9);
    CHECK(std::log2(errs[1] / errs[2]) >= 1.9);
  }
}

TEST_CASE("natural spline basis") {
  const std::vector<double> knots{-15.0, -8.0, -1.0, 5.0, 14.0};
  const NaturalSpline sp(line_points({-15.0, -14.0, -8.0, -7.0, -1.0, 0.0, 5.0, 6.0, 7.0, 12.0, 13.0, 14.0}), knots);
  SUBCASE("cardinal at the knots") {
    for (std::size_t j = 0; j < knots.size(); ++j) {
      const Vector b = sp.basis({knots[j]});
      for (std::size_t k = 0; k < knots.size(); ++k) {
        CHECK(b[static_cast<Eigen::Index>(k)] == doctest::Approx(j == k ? 1.0 : 0.0).epsilon(1e-14).scale(1.0));
      }
    }
  }
  SUBCASE("partition of unity") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int t = 0; t < 100; ++t) CHECK(sp.basis({u(gen)}).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant coefficients give a constant everywhere") {
    const Vector ones = Vector::Ones(5);
    const Vector r = sp.regression_mean(ones, dense_grid(-25.0, 25.0, 401));
    CHECK((r.array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
  SUBCASE("natural end conditions and C2 continuity") {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> n01;
    Vector g(5);
    for (int k = 0; k < 5; ++k) g[k] = n01(gen);
    auto f = [&](double s) { return sp.basis({s}).dot(g); };
    const double h = 1e-3;
    auto second = [&](double s) { return (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h); };
    // Cubic pieces: the centered second difference is exact up to rounding
    // inside a piece; at a knot it averages the two sides.
    CHECK(std::abs(second(-15.0)) <= 1e-5);
    CHECK(std::abs(second(14.0)) <= 1e-5);
    for (double c : {-8.0, -1.0, 5.0}) {
      CHECK(std::abs(second(c - 2 * h) - second(c + 2 * h)) <= 1e-3);
      const double d1l = (f(c) - f(c - h)) / h, d1r = (f(c + h) - f(c)) / h;
      CHECK(std::abs(d1l - d1r) <= 1e-2);
    }
  }
  SUBCASE("Jacobian is the basis, independent of gamma") {
    const Matrix j1 = sp.mean_jacobian(Vector::Zero(5));
    const Matrix j2 = sp.mean_jacobian(Vector::LinSpaced(5, -1.0, 3.0));
    CHECK(test::max_abs(j1 - j2) == 0.0);
    const Matrix fd = test::central_jacobian([&](const Vector& x) { return sp.solve_mean(x); }, Vector::LinSpaced(5, -1.0, 3.0), 1e-3);
    CHECK(test::max_abs(j1 - fd) <= 1e-10);
  }
  SUBCASE("local mean matches solve_mean") {
    const Vector g = Vector::LinSpaced(5, 2.0, -2.0);
    const Vector mu = sp.solve_mean(g);
    for (int i = 0; i < sp.size(); ++i) CHECK(sp.local_mean(i, g) == doctest::Approx(mu[i]).epsilon(1e-15));
  }
}

TEST_CASE("natural spline errors") {
  CHECK_THROWS_AS(NaturalSpline(line_points({0.0, 1.0}), {0.5}), InvalidInput);
  CHECK_THROWS_AS(NaturalSpline(line_points({0.0, 1.0}), {1.0, 0.0}), InvalidInput);
}

TEST_CASE("constant mean") {
  const ConstantMean c(line_points({0.0, 3.0, 7.0}));
  CHECK(c.num_params() == 1);
  const Vector mu = c.solve_mean(Vector::Constant(1, 2.5));
  CHECK((mu.array() == 2.5).all());
  CHECK(c.mean_jacobian(Vector::Zero(1)).isApprox(Matrix::Ones(3, 1)));
}
