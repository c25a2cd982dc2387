#include "ebf/error.hpp"
#include "ebf/kernel.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace ebf;
using ebf::test::kernel_direct;

TEST_CASE("kernel: zero distance gives the signal variance") {
  const CompactKernel k(2.5, 1.3);
  CHECK(k({0.4}, {0.4}) == 2.5);
  CHECK(kernel_eval(k, {1.0, -2.0}, {1.0, -2.0}) == 2.5);
}

TEST_CASE("kernel: exactly zero at and beyond the support") {
  const CompactKernel k(1.0, 2.0);
  CHECK(k.at_distance(2.0) == 0.0);
  CHECK(k.at_distance(2.0000001) == 0.0);
  CHECK(k.at_distance(1e9) == 0.0);
  CHECK_FALSE(k.in_support({0.0}, {2.0}));
  CHECK(k.in_support({0.0}, {1.999}));
}

TEST_CASE("kernel: half support gives one sixth") {
  const CompactKernel k(1.0, 3.0);
  CHECK(k.at_distance(1.5) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("kernel: matches the long-double definition across the support") {
  const CompactKernel k(1.7, 2.0);
  for (int i = 0; i <= 1000; ++i) {
    const double r = 2.0 * i / 1000.0;
    const long double ref = kernel_direct(1.7L, 2.0L, r);
    // Away from the edge the closed form is well conditioned.
    if (r < 1.8) CHECK(std::abs(k.at_distance(r) - static_cast<double>(ref)) <= 1e-14);
  }
}

TEST_CASE("kernel: accurate and positive near the support edge") {
  const double ell = 1.0;
  const CompactKernel k(1.0, ell);
  const double pi = std::numbers::pi;
  for (double delta : {0.07, 0.05, 0.02, 0.01, 1e-3}) {
    const long double ref = kernel_direct(1.0L, 1.0L, 1.0L - static_cast<long double>(delta));
    const double got = k.at_distance(ell - delta);
    CHECK(got > 0.0);
    // The long-double reference loses ~delta^-5 ulps; 1e-3 still leaves 1e-4 relative.
    const double tol = delta >= 0.01 ? 1e-9 : 1e-3;
    CHECK(std::abs(got / static_cast<double>(ref) - 1.0) <= tol);
  }
  // Leading term of the expansion: 4 pi^4 delta^5 / 45.
  for (double delta : {1e-4, 1e-6, 1e-8}) {
    const double lead = 4.0 * std::pow(pi, 4) * std::pow(delta, 5) / 45.0;
    CHECK(std::abs(k.at_distance(ell - delta) / lead - 1.0) <= 1e-6);
  }
}

TEST_CASE("kernel: monotone non-increasing on the support") {
  const CompactKernel k(3.0, 0.7);
  double prev = k.at_distance(0.0);
  for (int i = 1; i <= 5000; ++i) {
    const double v = k.at_distance(0.7 * i / 5000.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("kernel: invalid parameters and mismatched points throw") {
  CHECK_THROWS_AS(CompactKernel(0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(CompactKernel(1.0, -1.0), InvalidInput);
  CHECK_THROWS_AS(CompactKernel(std::nan(""), 1.0), InvalidInput);
  const CompactKernel k(1.0, 1.0);
  CHECK_THROWS_AS(kernel_eval(k, {0.0}, {0.0, 1.0}), InvalidInput);
}

TEST_CASE("cov_train: small examples") {
  const CompactKernel k(2.0, 1.0);
  SUBCASE("two far points") {
    const auto c = cov_train(k, test::line_points({0.0, 5.0}));
    CHECK(c.to_dense().isApprox(2.0 * Matrix::Identity(2, 2)));
    CHECK(c.nnz() == 2);
  }
  SUBCASE("one point") {
    const auto c = cov_train(k, test::line_points({0.3}));
    CHECK(c.at(0, 0) == 2.0);
  }
  SUBCASE("three points at half support") {
    const auto c = cov_train(k, test::line_points({0.0, 0.5, 1.0}));
    const Matrix d = c.to_dense();
    for (int i = 0; i < 3; ++i) CHECK(d(i, i) == 2.0);
    CHECK(d(0, 1) == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
    CHECK(d(1, 2) == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
    CHECK(d(0, 2) == 0.0);
    CHECK_FALSE(c.contains(0, 2));
  }
}

TEST_CASE("cov_cross: support and effective neighbors") {
  const CompactKernel k(1.0, 1.0);
  const auto sensors = test::line_points({0.0, 1.0, 3.0});
  SUBCASE("grid point on a sensor") {
    const auto c = cov_cross(k, test::line_points({3.0}), sensors);
    CHECK(effective_neighbors(c, 0) == std::vector<int>{2});
    CHECK(c.at(0, 2) == 1.0);
  }
  SUBCASE("grid point out of range of every sensor") {
    const auto c = cov_cross(k, test::line_points({10.0}), sensors);
    CHECK(effective_neighbors(c, 0).empty());
    CHECK(c.row(0).empty());
  }
  SUBCASE("grid point midway between two sensors") {
    const auto c = cov_cross(k, test::line_points({0.5}), sensors);
    CHECK(effective_neighbors(c, 0) == std::vector<int>{0, 1});
    CHECK(c.at(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(c.at(0, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  }
}

TEST_CASE("cov_train matches a dense evaluation of the definition") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point> pts;
    for (int i = 0; i < 12; ++i) pts.push_back({u(gen), u(gen)});
    const CompactKernel k(1.0 + trial * 0.1, 1.0 + 0.2 * trial);
    const Matrix ref = test::dense_kernel(k, pts, pts);
    CHECK(test::max_abs(cov_train(k, pts).to_dense() - ref) <= 1e-13);
  }
}

TEST_CASE("spd_check") {
  SparseCovariance eye(2, 2);
  eye.set_row(0, {{0, 1.0}});
  eye.set_row(1, {{1, 1.0}});
  CHECK(spd_check(eye, 0.0));

  SparseCovariance indefinite(2, 2);
  indefinite.set_row(0, {{0, 1.0}, {1, 2.0}});
  indefinite.set_row(1, {{0, 2.0}, {1, 1.0}});
  CHECK_FALSE(spd_check(indefinite, 0.0));

  CHECK_THROWS_AS(spd_check(SparseCovariance(2, 3), 0.0), InvalidInput);
}

TEST_CASE("property: covariance of random locations plus positive noise is positive definite") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Point> pts;
    for (int i = 0; i < 15; ++i) pts.push_back({u(gen)});
    const CompactKernel k(2.0, 0.5 + 0.1 * trial);
    const auto c = cov_train(k, pts);
    CHECK(spd_check(c, 1e-6));
    // Independent oracle: eigenvalues of the dense kernel plus the shift.
    const Matrix dense = test::dense_kernel(k, pts, pts) + 1e-6 * Matrix::Identity(15, 15);
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("SparseCovariance: row bookkeeping and dense limits") {
  SparseCovariance c(3, 3);
  CHECK_THROWS_AS(c.set_row(0, {{1, 1.0}, {0, 1.0}}), InvalidInput);
  CHECK_THROWS_AS(c.set_row(0, {{3, 1.0}}), InvalidInput);
  c.set_row(1, {{0, 2.0}, {2, 3.0}});
  CHECK(c.row_pattern(1) == std::vector<int>{0, 2});
  CHECK(c.at(1, 1) == 0.0);
  const Vector y = c.multiply(Vector::Ones(3));
  CHECK(y[1] == 5.0);
  CHECK_THROWS_AS(SparseCovariance(65, 65).to_dense(), InvalidInput);
}
