#pragma once

#include "ebf/distnet.hpp"
#include "ebf/dynamics.hpp"
#include "ebf/estimator.hpp"
#include "ebf/model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ebf::harness {

enum class ScenarioKind { Temperature, Spline, Custom };
enum class Mode { Centralized, Distributed };

std::string to_string(ScenarioKind kind);
std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct TemperatureTruth {
  double amplitude = 6.0;
  double frequency = 3.0;
  double phase = 3.0;
};

struct QuadraticTruth {
  double a = 0.1;
  double b = 0.1;
  double c = 10.0;
};

enum class MeanModel { Poisson, Spline, Constant };

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Temperature;
  std::uint64_t seed = 1;

  int sensor_count = 10;
  std::optional<std::array<double, 2>> uniform_range;  // either this ...
  std::vector<double> positions;                       // ... or explicit positions
  std::vector<int> observations_per_sensor{25};        // one entry = same for all
  double noise_variance = 0.01;

  double signal_variance = 4.0;
  std::optional<double> support_length;  // empty: twice the largest spacing

  TemperatureTruth temperature;
  QuadraticTruth quadratic;

  MeanModel model = MeanModel::Poisson;
  std::array<double, 2> boundary{3.0, 0.0};  // Poisson w_1, w_N
  std::vector<int> knot_indices;             // spline control points, 1-based

  int grid_count = 200;
  std::optional<std::array<double, 2>> grid_range;  // empty: sensor span

  SolverSettings solver;
  std::vector<double> init;  // empty: model default

  std::vector<std::vector<double>> observations;  // custom scenarios only
};

/// Defaults for the two simulated scenarios.
ScenarioConfig default_config(ScenarioKind kind);

/// Strict JSON parse; unknown keys are rejected with InvalidInput.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every field spelled out.
std::string serialize_config(const ScenarioConfig& cfg);

/// Sensor coordinates implied by the configuration.
std::vector<double> sensor_positions(const ScenarioConfig& cfg);
/// Kernel support actually used.
double support_length(const ScenarioConfig& cfg);

using FieldFunction = std::function<double(double)>;

struct GeneratedData {
  ObservationSet observations;
  FieldFunction truth;
};

/// Closed-form solution of mu'' = -A w^2 sin(w s + phi) with Dirichlet data.
FieldFunction temperature_field(const TemperatureTruth& truth, double s_first, double s_last,
                                double w_first, double w_last);

GeneratedData generate_temperature(const ScenarioConfig& cfg);
GeneratedData generate_spline_scenario(const ScenarioConfig& cfg);

/// A ready-to-run scenario: data, kernel, mean model, grid.
struct Scenario {
  ScenarioConfig config;
  ObservationSet observations;
  FieldFunction truth;  // empty for custom data
  std::optional<Vector> true_gamma;
  CompactKernel kernel{1.0, 1.0};
  std::shared_ptr<const SpatialDynamics> dynamics;
  RegressionGrid grid;
  Hyperparameters init;
};

Scenario build_scenario(const ScenarioConfig& cfg);

struct TrialMetrics {
  double rmse_map = 0.0;
  double rmse_prior = 0.0;
  double coverage95 = 0.0;
  std::vector<double> gamma_error;  // relative, per component; empty without truth
  bool has_truth = false;
};

TrialMetrics compute_metrics(const Scenario& scenario, const MLResult& ml, const Posterior& post);

struct PipelineResult {
  Scenario scenario;
  MLResult ml;
  Posterior posterior;
  TrialMetrics metrics;
  std::optional<net::NetworkTrace> trace;
  Mode mode = Mode::Centralized;
};

/// Tolerances checked when comparing distributed against centralized runs.
struct EquivalenceTolerance {
  double relative_cost = 1e-6;
  double gamma = 1e-5;
  double map = 1e-10;
};

PipelineResult run_pipeline(const ScenarioConfig& cfg, Mode mode);

/// Posterior from previously estimated hyperparameters.
PipelineResult run_map(const ScenarioConfig& cfg, const Vector& gamma);

struct Comparison {
  double cost_centralized = 0.0;
  double cost_distributed = 0.0;
  double relative_cost_diff = 0.0;
  double gamma_diff = 0.0;
  double map_diff = 0.0;        // distributed local MAP vs centralized MAP, same gamma and z
  double map_diff_cross = 0.0;  // distributed vs centralized pipelines end to end
  double variance_diff = 0.0;
  bool within_tolerance = false;
};

Comparison compare_modes(const ScenarioConfig& cfg, const EquivalenceTolerance& tol = {});

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};

struct MonteCarloReport {
  int trials = 0;
  Aggregate rmse_map;
  Aggregate rmse_prior;
  Aggregate coverage95;
  double pooled_coverage95 = 0.0;
  std::vector<Aggregate> gamma_error;
  std::vector<double> gamma_within_5pct;  // fraction of trials, per component
  double all_within_5pct = 0.0;
  bool has_truth = false;
};

MonteCarloReport monte_carlo(const ScenarioConfig& cfg, int trials, Mode mode = Mode::Centralized);

std::string to_json(const MonteCarloReport& report);
std::string to_json(const Comparison& cmp);
std::string to_json(const MLResult& ml);
std::string to_json(const TrialMetrics& m);

/// Reads gamma from an ml_result.json written by write_results.
Vector read_gamma(const std::filesystem::path& path);

/// Shortest decimal that round-trips (at most 17 significant digits).
std::string format_number(double v);

/// posterior.csv (s, truth, prior_mean, map_mean, lower95, upper95) and
/// points.csv (one row per raw observation).
void emit_plotdata(const PipelineResult& result, const std::filesystem::path& dir);

/// Plot data plus ml_result.json, metrics.json, scenario.json and, for
/// distributed runs, trace.csv.
void write_results(const PipelineResult& result, const std::filesystem::path& dir);

/// points.csv and dataset.json (a custom scenario embedding the data).
void write_dataset(const Scenario& scenario, const std::filesystem::path& dir);

}  // namespace ebf::harness
