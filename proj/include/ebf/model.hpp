#pragma once

#include "ebf/kernel.hpp"
#include "ebf/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace ebf {

/// One sensor: 1-based id, location, and its raw samples.
struct SensorRecord {
  int id = 0;
  Point location;
  std::vector<double> observations;
};

struct ObservationSet {
  std::vector<SensorRecord> sensors;  // ordered by id
  double noise_variance = 0.0;        // sigma^2, shared by all sensors
  int dimension = 1;

  int size() const noexcept { return static_cast<int>(sensors.size()); }
  std::vector<Point> locations() const;
  std::vector<int> counts() const;
  int total_observations() const;
};

/// Per-node sample means and the diagonal of D = diag(sigma^2 / L_i).
struct SufficientStats {
  Vector xbar;
  Vector d_diag;
};

SufficientStats sufficient_stats(const ObservationSet& obs);

/// Undirected graph with a self-loop at every node; neighbor lists are
/// sorted and 0-based (node index i corresponds to sensor id i + 1).
struct InteractionGraph {
  int n = 0;
  std::vector<std::vector<int>> neighbor_sets;

  bool adjacent(int i, int j) const;
  /// Number of undirected edges, self-loops excluded.
  int edge_count() const;
  bool is_symmetric() const;
};

InteractionGraph build_interaction_graph(std::span<const Point> locations,
                                         const CompactKernel& kernel);

struct RegressionGrid {
  std::vector<Point> points;

  int size() const noexcept { return static_cast<int>(points.size()); }
};

/// Returns human-readable violations; an empty list means the scenario is
/// consistent. Never throws.
std::vector<std::string> validate_scenario(const ObservationSet& obs, const RegressionGrid& grid,
                                           const InteractionGraph& graph);

/// Throws InvalidInput listing all violations, if any.
void require_valid(const ObservationSet& obs, const RegressionGrid& grid,
                   const InteractionGraph& graph);

}  // namespace ebf
