#include "ebf/model.hpp"

#include "ebf/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ebf {

std::vector<Point> ObservationSet::locations() const {
  std::vector<Point> out;
  out.reserve(sensors.size());
  for (const auto& s : sensors) out.push_back(s.location);
  return out;
}

std::vector<int> ObservationSet::counts() const {
  std::vector<int> out;
  out.reserve(sensors.size());
  for (const auto& s : sensors) out.push_back(static_cast<int>(s.observations.size()));
  return out;
}

int ObservationSet::total_observations() const {
  int total = 0;
  for (const auto& s : sensors) total += static_cast<int>(s.observations.size());
  return total;
}

SufficientStats sufficient_stats(const ObservationSet& obs) {
  const int n = obs.size();
  SufficientStats stats{Vector(n), Vector(n)};
  for (int i = 0; i < n; ++i) {
    const auto& samples = obs.sensors[static_cast<std::size_t>(i)].observations;
    if (samples.empty()) {
      throw InvalidInput("sensor " + std::to_string(obs.sensors[static_cast<std::size_t>(i)].id) +
                         " has no observations");
    }
    double sum = 0.0;
    for (double x : samples) sum += x;
    const double count = static_cast<double>(samples.size());
    stats.xbar[i] = sum / count;
    stats.d_diag[i] = obs.noise_variance / count;
  }
  return stats;
}

bool InteractionGraph::adjacent(int i, int j) const {
  const auto& nb = neighbor_sets.at(static_cast<std::size_t>(i));
  return std::binary_search(nb.begin(), nb.end(), j);
}

int InteractionGraph::edge_count() const {
  int twice = 0;
  for (int i = 0; i < n; ++i) {
    for (int j : neighbor_sets[static_cast<std::size_t>(i)]) {
      if (j != i) ++twice;
    }
  }
  return twice / 2;
}

bool InteractionGraph::is_symmetric() const {
  for (int i = 0; i < n; ++i) {
    for (int j : neighbor_sets[static_cast<std::size_t>(i)]) {
      if (j < 0 || j >= n || !adjacent(j, i)) return false;
    }
  }
  return true;
}

InteractionGraph build_interaction_graph(std::span<const Point> locations,
                                         const CompactKernel& kernel) {
  InteractionGraph g;
  g.n = static_cast<int>(locations.size());
  g.neighbor_sets.resize(locations.size());
  for (std::size_t i = 0; i < locations.size(); ++i) {
    for (std::size_t j = 0; j < locations.size(); ++j) {
      if (i == j || kernel.in_support(locations[i], locations[j])) {
        g.neighbor_sets[i].push_back(static_cast<int>(j));
      }
    }
  }
  return g;
}

namespace {

bool finite_point(const Point& p) {
  return std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

std::vector<std::string> validate_scenario(const ObservationSet& obs, const RegressionGrid& grid,
                                           const InteractionGraph& graph) {
  std::vector<std::string> issues;
  const int n = obs.size();

  if (!(obs.noise_variance > 0.0) || !std::isfinite(obs.noise_variance)) {
    std::ostringstream os;
    os << "noise variance must be positive, got " << obs.noise_variance;
    issues.push_back(os.str());
  }
  if (obs.dimension < 1) issues.push_back("dimension must be at least 1");
  if (n == 0) issues.push_back("no sensors");

  for (int i = 0; i < n; ++i) {
    const auto& s = obs.sensors[static_cast<std::size_t>(i)];
    if (s.id != i + 1) {
      issues.push_back("sensor at position " + std::to_string(i + 1) + " has id " +
                       std::to_string(s.id) + "; ids must be 1..N in order");
    }
    if (static_cast<int>(s.location.size()) != obs.dimension) {
      issues.push_back("sensor " + std::to_string(s.id) + " location has wrong dimension");
    } else if (!finite_point(s.location)) {
      issues.push_back("sensor " + std::to_string(s.id) + " location is not finite");
    }
    if (s.observations.empty()) {
      issues.push_back("sensor " + std::to_string(s.id) + " has no observations");
    }
    if (!std::all_of(s.observations.begin(), s.observations.end(),
                     [](double v) { return std::isfinite(v); })) {
      issues.push_back("sensor " + std::to_string(s.id) + " has non-finite observations");
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& a = obs.sensors[static_cast<std::size_t>(i)];
      const auto& b = obs.sensors[static_cast<std::size_t>(j)];
      if (a.location == b.location) {
        issues.push_back("sensors " + std::to_string(a.id) + " and " + std::to_string(b.id) +
                         " share a location");
      }
    }
  }

  if (grid.points.empty()) issues.push_back("regression grid is empty");
  for (std::size_t m = 0; m < grid.points.size(); ++m) {
    if (static_cast<int>(grid.points[m].size()) != obs.dimension ||
        !finite_point(grid.points[m])) {
      issues.push_back("regression point " + std::to_string(m + 1) + " is malformed");
    }
  }

  if (graph.n != n || static_cast<int>(graph.neighbor_sets.size()) != n) {
    issues.push_back("interaction graph size does not match sensor count");
  } else {
    bool self_loops = true;
    for (int i = 0; i < n; ++i) self_loops = self_loops && graph.adjacent(i, i);
    if (!self_loops) issues.push_back("interaction graph is missing self-loops");
    if (!graph.is_symmetric()) issues.push_back("interaction graph is not symmetric");
  }
  return issues;
}

void require_valid(const ObservationSet& obs, const RegressionGrid& grid,
                   const InteractionGraph& graph) {
  const auto issues = validate_scenario(obs, grid, graph);
  if (issues.empty()) return;
  std::string msg = "invalid scenario:";
  for (const auto& s : issues) msg += "\n  - " + s;
  throw InvalidInput(msg);
}

}  // namespace ebf
