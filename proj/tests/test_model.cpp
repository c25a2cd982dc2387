#include "ebf/error.hpp"
#include "ebf/model.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace ebf;
using test::line_points;
using test::make_observations;

TEST_CASE("sufficient statistics") {
  SUBCASE("two samples") {
    const auto s = sufficient_stats(make_observations(line_points({0.0}), {{1.0, 3.0}}, 1.0));
    CHECK(s.xbar[0] == 2.0);
    CHECK(s.d_diag[0] == 0.5);
  }
  SUBCASE("one sample") {
    const auto s = sufficient_stats(make_observations(line_points({0.0}), {{7.3}}, 1.0));
    CHECK(s.xbar[0] == 7.3);
    CHECK(s.d_diag[0] == 1.0);
  }
  SUBCASE("four samples") {
    const auto s = sufficient_stats(make_observations(line_points({0.0}), {{0, 0, 0, 4}}, 1.0));
    CHECK(s.xbar[0] == 1.0);
    CHECK(s.d_diag[0] == 0.25);
  }
  SUBCASE("empty sample list") {
    CHECK_THROWS_AS(sufficient_stats(make_observations(line_points({0.0}), {{}}, 1.0)), InvalidInput);
  }
}

TEST_CASE("interaction graph") {
  SUBCASE("path from a short support") {
    const auto g = build_interaction_graph(line_points({0.0, 1.0, 2.0}), CompactKernel(1.0, 1.5));
    CHECK(g.adjacent(0, 1));
    CHECK(g.adjacent(1, 2));
    CHECK_FALSE(g.adjacent(0, 2));
    CHECK(g.edge_count() == 2);
    CHECK(g.neighbor_sets[1] == std::vector<int>{0, 1, 2});
  }
  SUBCASE("support wider than the domain") {
    const auto g = build_interaction_graph(line_points({0.0, 1.0, 2.0, 3.5}), CompactKernel(1.0, 10.0));
    CHECK(g.edge_count() == 6);
  }
  SUBCASE("support below the spacing") {
    const auto g = build_interaction_graph(line_points({0.0, 1.0, 2.0}), CompactKernel(1.0, 0.5));
    CHECK(g.edge_count() == 0);
    for (int i = 0; i < 3; ++i) CHECK(g.neighbor_sets[static_cast<std::size_t>(i)] == std::vector<int>{i});
  }
  SUBCASE("symmetric with self-loops") {
    const auto g = build_interaction_graph(line_points({0.0, 0.3, 0.9, 1.1, 2.4}), CompactKernel(1.0, 0.7));
    CHECK(g.is_symmetric());
    for (int i = 0; i < g.n; ++i) CHECK(g.adjacent(i, i));
  }
}

namespace {

ObservationSet ten_sensors() {
  return make_observations(test::uniform_points(10, 0.0, 2.0), std::vector<std::vector<double>>(10, {1.0, 2.0}), 0.01);
}

InteractionGraph graph_for(const ObservationSet& obs) {
  return build_interaction_graph(obs.locations(), CompactKernel(1.0, 0.5));
}

}  // namespace

TEST_CASE("validate_scenario") {
  const RegressionGrid grid{line_points({0.5, 1.0})};
  SUBCASE("well formed") {
    const auto obs = ten_sensors();
    CHECK(validate_scenario(obs, grid, graph_for(obs)).empty());
    CHECK_NOTHROW(require_valid(obs, grid, graph_for(obs)));
  }
  SUBCASE("duplicated location names both ids") {
    auto obs = ten_sensors();
    obs.sensors[6].location = obs.sensors[2].location;
    const auto issues = validate_scenario(obs, grid, graph_for(obs));
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("3") != std::string::npos);
    CHECK(issues[0].find("7") != std::string::npos);
  }
  SUBCASE("zero noise variance") {
    auto obs = ten_sensors();
    obs.noise_variance = 0.0;
    CHECK(validate_scenario(obs, grid, graph_for(obs)).size() == 1);
    CHECK_THROWS_AS(require_valid(obs, grid, graph_for(obs)), InvalidInput);
  }
  SUBCASE("sensor without observations") {
    auto obs = ten_sensors();
    obs.sensors[4].observations.clear();
    CHECK(validate_scenario(obs, grid, graph_for(obs)).size() == 1);
  }
  SUBCASE("empty grid") {
    const auto obs = ten_sensors();
    CHECK(validate_scenario(obs, RegressionGrid{}, graph_for(obs)).size() == 1);
  }
  SUBCASE("asymmetric graph") {
    const auto obs = ten_sensors();
    auto g = graph_for(obs);
    g.neighbor_sets[0].push_back(9);
    CHECK_FALSE(validate_scenario(obs, grid, g).empty());
  }
}
