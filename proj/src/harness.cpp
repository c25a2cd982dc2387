#include "ebf/harness.hpp"

#include "ebf/error.hpp"
#include "ebf/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ebf::harness {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Temperature: return "temperature";
    case ScenarioKind::Spline: return "spline";
    case ScenarioKind::Custom: return "custom";
  }
  return "?";
}

std::string to_string(Mode mode) {
  return mode == Mode::Centralized ? "centralized" : "distributed";
}

Mode parse_mode(const std::string& text) {
  if (text == "centralized") return Mode::Centralized;
  if (text == "distributed") return Mode::Distributed;
  throw InvalidInput("unknown mode '" + text + "' (expected centralized or distributed)");
}

namespace {

ScenarioKind parse_kind(const std::string& text) {
  if (text == "temperature") return ScenarioKind::Temperature;
  if (text == "spline") return ScenarioKind::Spline;
  if (text == "custom") return ScenarioKind::Custom;
  throw InvalidInput("unknown scenario kind '" + text + "'");
}

std::string model_name(MeanModel m) {
  switch (m) {
    case MeanModel::Poisson: return "poisson";
    case MeanModel::Spline: return "spline";
    case MeanModel::Constant: return "constant";
  }
  return "?";
}

MeanModel parse_model(const std::string& text) {
  if (text == "poisson") return MeanModel::Poisson;
  if (text == "spline") return MeanModel::Spline;
  if (text == "constant") return MeanModel::Constant;
  throw InvalidInput("unknown mean model '" + text + "'");
}

}  // namespace

ScenarioConfig default_config(ScenarioKind kind) {
  ScenarioConfig cfg;
  cfg.kind = kind;
  if (kind == ScenarioKind::Temperature || kind == ScenarioKind::Custom) {
    cfg.sensor_count = 10;
    cfg.uniform_range = std::array<double, 2>{0.0, 2.0 * std::numbers::pi / 3.0};
    cfg.observations_per_sensor = {25};
    cfg.noise_variance = 0.01;
    cfg.model = MeanModel::Poisson;
    cfg.boundary = {3.0, 0.0};
    cfg.init = {5.0, 2.5, 2.5};
    cfg.grid_count = 200;
    // Matches the scale of the mean-model misfit; with sf2 = 4 the 95% band
    // covers the truth almost everywhere.
    cfg.signal_variance = 1e-3;
  }
  if (kind == ScenarioKind::Spline) {
    // 12 sensors in five clusters between -15 and 14.
    cfg.sensor_count = 12;
    cfg.uniform_range.reset();
    cfg.positions = {-15.0, -14.0, -8.0, -7.0, -1.0, 0.0, 5.0, 6.0, 7.0, 12.0, 13.0, 14.0};
    cfg.observations_per_sensor = {10, 2, 8, 1, 6, 2, 10, 1, 4, 6, 2, 8};
    cfg.noise_variance = 0.25;
    cfg.model = MeanModel::Spline;
    cfg.knot_indices = {1, 3, 5, 7, 12};
    cfg.init = {};
    cfg.grid_count = 200;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Config JSON

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw InvalidInput(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw InvalidInput("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput("bad or missing '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

std::array<double, 2> get_pair(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) throw InvalidInput(where + " must be a two-element array");
  try {
    return {v[0].get<double>(), v[1].get<double>()};
  } catch (const json::exception& e) {
    throw InvalidInput(where + ": " + e.what());
  }
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, {"kind", "seed", "sensors", "observations_per_sensor", "noise_variance", "kernel",
                    "truth", "dynamics", "grid", "solver", "observations"},
             "config");
  ScenarioConfig cfg;
  cfg.kind = parse_kind(get_as<std::string>(root, "kind", "config"));
  if (!root.contains("seed")) throw InvalidInput("config requires a seed");
  cfg.seed = get_as<std::uint64_t>(root, "seed", "config");

  const json& sensors = root.at("sensors");
  check_keys(sensors, {"count", "uniform", "positions"}, "sensors");
  cfg.sensor_count = get_as<int>(sensors, "count", "sensors");
  if (sensors.contains("uniform") == sensors.contains("positions")) {
    throw InvalidInput("sensors needs exactly one of 'uniform' or 'positions'");
  }
  if (sensors.contains("uniform")) cfg.uniform_range = get_pair(sensors.at("uniform"), "sensors.uniform");
  if (sensors.contains("positions")) cfg.positions = get_as<std::vector<double>>(sensors, "positions", "sensors");

  if (root.contains("observations_per_sensor")) {
    const json& l = root.at("observations_per_sensor");
    cfg.observations_per_sensor = l.is_array() ? l.get<std::vector<int>>() : std::vector<int>{l.get<int>()};
  }
  cfg.noise_variance = get_as<double>(root, "noise_variance", "config");

  if (root.contains("kernel")) {
    const json& k = root.at("kernel");
    check_keys(k, {"signal_variance", "support_length"}, "kernel");
    if (k.contains("signal_variance")) cfg.signal_variance = get_as<double>(k, "signal_variance", "kernel");
    if (k.contains("support_length") && !k.at("support_length").is_null()) {
      cfg.support_length = get_as<double>(k, "support_length", "kernel");
    }
  }

  if (root.contains("truth") && !root.at("truth").is_null()) {
    const json& t = root.at("truth");
    if (cfg.kind == ScenarioKind::Temperature) {
      check_keys(t, {"amplitude", "frequency", "phase"}, "truth");
      cfg.temperature.amplitude = get_as<double>(t, "amplitude", "truth");
      cfg.temperature.frequency = get_as<double>(t, "frequency", "truth");
      cfg.temperature.phase = get_as<double>(t, "phase", "truth");
    } else if (cfg.kind == ScenarioKind::Spline) {
      check_keys(t, {"a", "b", "c"}, "truth");
      cfg.quadratic.a = get_as<double>(t, "a", "truth");
      cfg.quadratic.b = get_as<double>(t, "b", "truth");
      cfg.quadratic.c = get_as<double>(t, "c", "truth");
    } else {
      throw InvalidInput("custom scenarios carry no truth");
    }
  }

  const json& dyn = root.at("dynamics");
  check_keys(dyn, {"model", "boundary", "knots"}, "dynamics");
  cfg.model = parse_model(get_as<std::string>(dyn, "model", "dynamics"));
  if (cfg.model == MeanModel::Poisson) {
    cfg.boundary = get_pair(dyn.at("boundary"), "dynamics.boundary");
    if (dyn.contains("knots")) throw InvalidInput("dynamics.knots applies to the spline model only");
  } else if (cfg.model == MeanModel::Spline) {
    cfg.knot_indices = get_as<std::vector<int>>(dyn, "knots", "dynamics");
    if (dyn.contains("boundary")) throw InvalidInput("dynamics.boundary applies to the poisson model only");
  } else if (dyn.contains("knots") || dyn.contains("boundary")) {
    throw InvalidInput("the constant model takes no parameters");
  }

  if (root.contains("grid")) {
    const json& g = root.at("grid");
    check_keys(g, {"count", "range"}, "grid");
    cfg.grid_count = get_as<int>(g, "count", "grid");
    if (g.contains("range") && !g.at("range").is_null()) cfg.grid_range = get_pair(g.at("range"), "grid.range");
  }

  if (root.contains("solver")) {
    const json& s = root.at("solver");
    check_keys(s, {"tol", "max_iters", "starts", "init"}, "solver");
    if (s.contains("tol")) cfg.solver.tol = get_as<double>(s, "tol", "solver");
    if (s.contains("max_iters")) cfg.solver.max_iters = get_as<int>(s, "max_iters", "solver");
    if (s.contains("starts")) cfg.solver.starts = get_as<int>(s, "starts", "solver");
    if (s.contains("init")) cfg.init = get_as<std::vector<double>>(s, "init", "solver");
  }

  if (root.contains("observations")) {
    if (cfg.kind != ScenarioKind::Custom) throw InvalidInput("'observations' is only allowed for custom scenarios");
    cfg.observations = get_as<std::vector<std::vector<double>>>(root, "observations", "config");
  } else if (cfg.kind == ScenarioKind::Custom) {
    throw InvalidInput("custom scenarios require 'observations'");
  }

  if (cfg.sensor_count < 1) throw InvalidInput("sensors.count must be at least 1");
  if (cfg.grid_count < 1) throw InvalidInput("grid.count must be at least 1");
  if (cfg.solver.max_iters < 0 || cfg.solver.starts < 0) throw InvalidInput("solver limits must be non-negative");
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  ordered_json root;
  root["kind"] = to_string(cfg.kind);
  root["seed"] = cfg.seed;
  ordered_json sensors;
  sensors["count"] = cfg.sensor_count;
  if (cfg.uniform_range) {
    sensors["uniform"] = {(*cfg.uniform_range)[0], (*cfg.uniform_range)[1]};
  } else {
    sensors["positions"] = cfg.positions;
  }
  root["sensors"] = sensors;
  root["observations_per_sensor"] = cfg.observations_per_sensor;
  root["noise_variance"] = cfg.noise_variance;
  ordered_json kernel;
  kernel["signal_variance"] = cfg.signal_variance;
  kernel["support_length"] = cfg.support_length ? ordered_json(*cfg.support_length) : ordered_json(nullptr);
  root["kernel"] = kernel;
  if (cfg.kind == ScenarioKind::Temperature) {
    root["truth"] = {{"amplitude", cfg.temperature.amplitude},
                     {"frequency", cfg.temperature.frequency},
                     {"phase", cfg.temperature.phase}};
  } else if (cfg.kind == ScenarioKind::Spline) {
    root["truth"] = {{"a", cfg.quadratic.a}, {"b", cfg.quadratic.b}, {"c", cfg.quadratic.c}};
  }
  ordered_json dyn;
  dyn["model"] = model_name(cfg.model);
  if (cfg.model == MeanModel::Poisson) dyn["boundary"] = {cfg.boundary[0], cfg.boundary[1]};
  if (cfg.model == MeanModel::Spline) dyn["knots"] = cfg.knot_indices;
  root["dynamics"] = dyn;
  ordered_json grid;
  grid["count"] = cfg.grid_count;
  grid["range"] = cfg.grid_range ? ordered_json{(*cfg.grid_range)[0], (*cfg.grid_range)[1]} : ordered_json(nullptr);
  root["grid"] = grid;
  ordered_json solver;
  solver["tol"] = cfg.solver.tol;
  solver["max_iters"] = cfg.solver.max_iters;
  solver["starts"] = cfg.solver.starts;
  solver["init"] = cfg.init;
  root["solver"] = solver;
  if (cfg.kind == ScenarioKind::Custom) root["observations"] = cfg.observations;
  return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Data generation

std::vector<double> sensor_positions(const ScenarioConfig& cfg) {
  const int n = cfg.sensor_count;
  if (cfg.uniform_range) {
    const auto [lo, hi] = *cfg.uniform_range;
    if (!(hi > lo)) throw InvalidInput("sensors.uniform must be an increasing range");
    std::vector<double> s(static_cast<std::size_t>(n));
    if (n == 1) {
      s[0] = lo;
      return s;
    }
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    s.back() = hi;
    return s;
  }
  if (static_cast<int>(cfg.positions.size()) != n) {
    throw InvalidInput("sensors.positions has " + std::to_string(cfg.positions.size()) +
                       " entries, expected " + std::to_string(n));
  }
  return cfg.positions;
}

double support_length(const ScenarioConfig& cfg) {
  if (cfg.support_length) return *cfg.support_length;
  auto s = sensor_positions(cfg);
  std::sort(s.begin(), s.end());
  double widest = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) widest = std::max(widest, s[i] - s[i - 1]);
  if (!(widest > 0.0)) throw InvalidInput("cannot derive a kernel support from a single location");
  return 2.0 * widest;
}

namespace {

std::vector<int> per_sensor_counts(const ScenarioConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.sensor_count);
  std::vector<int> counts;
  if (cfg.observations_per_sensor.size() == 1) {
    counts.assign(n, cfg.observations_per_sensor[0]);
  } else if (cfg.observations_per_sensor.size() == n) {
    counts = cfg.observations_per_sensor;
  } else {
    throw InvalidInput("observations_per_sensor must have 1 or N entries");
  }
  for (int c : counts) {
    if (c < 1) throw InvalidInput("every sensor needs at least one observation");
  }
  return counts;
}

ObservationSet sample_observations(const ScenarioConfig& cfg, const FieldFunction& truth) {
  if (!(cfg.noise_variance >= 0.0)) throw InvalidInput("noise variance must be non-negative");
  const auto positions = sensor_positions(cfg);
  const auto counts = per_sensor_counts(cfg);
  const double sigma = std::sqrt(cfg.noise_variance);
  CounterRng rng(cfg.seed);
  ObservationSet obs;
  obs.noise_variance = cfg.noise_variance;
  obs.dimension = 1;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    SensorRecord rec;
    rec.id = static_cast<int>(i) + 1;
    rec.location = {positions[i]};
    const double value = truth(positions[i]);
    for (int l = 0; l < counts[i]; ++l) rec.observations.push_back(value + sigma * rng.normal());
    obs.sensors.push_back(std::move(rec));
  }
  return obs;
}

}  // namespace

FieldFunction temperature_field(const TemperatureTruth& truth, double s_first, double s_last,
                                double w_first, double w_last) {
  const double amp = truth.amplitude, omega = truth.frequency, phase = truth.phase;
  const double c1 = (w_last + amp * std::sin(omega * s_last + phase) - w_first -
                     amp * std::sin(omega * s_first + phase)) /
                    (s_last - s_first);
  const double c0 = w_first - amp * std::sin(omega * s_first + phase) - c1 * s_first;
  return [=](double s) { return amp * std::sin(omega * s + phase) + c1 * s + c0; };
}

GeneratedData generate_temperature(const ScenarioConfig& cfg) {
  if (cfg.sensor_count < 3) throw InvalidInput("temperature scenario needs at least 3 sensors");
  const auto positions = sensor_positions(cfg);
  const auto [lo, hi] = std::minmax_element(positions.begin(), positions.end());
  GeneratedData out;
  out.truth = temperature_field(cfg.temperature, *lo, *hi, cfg.boundary[0], cfg.boundary[1]);
  out.observations = sample_observations(cfg, out.truth);
  return out;
}

GeneratedData generate_spline_scenario(const ScenarioConfig& cfg) {
  for (int k : cfg.knot_indices) {
    if (k < 1 || k > cfg.sensor_count) {
      throw InvalidInput("knot index " + std::to_string(k) + " out of range 1.." +
                         std::to_string(cfg.sensor_count));
    }
  }
  const QuadraticTruth q = cfg.quadratic;
  GeneratedData out;
  out.truth = [q](double s) { return q.a * s * s + q.b * s + q.c; };
  out.observations = sample_observations(cfg, out.truth);
  return out;
}

// ---------------------------------------------------------------------------
// Scenario assembly

Scenario build_scenario(const ScenarioConfig& cfg) {
  Scenario sc;
  sc.config = cfg;
  switch (cfg.kind) {
    case ScenarioKind::Temperature: {
      if (cfg.model != MeanModel::Poisson) throw InvalidInput("temperature scenarios use the poisson model");
      auto data = generate_temperature(cfg);
      sc.observations = std::move(data.observations);
      sc.truth = std::move(data.truth);
      Vector g(3);
      g << cfg.temperature.amplitude, cfg.temperature.frequency, cfg.temperature.phase;
      sc.true_gamma = g;
      break;
    }
    case ScenarioKind::Spline: {
      auto data = generate_spline_scenario(cfg);
      sc.observations = std::move(data.observations);
      sc.truth = std::move(data.truth);
      break;
    }
    case ScenarioKind::Custom: {
      const auto positions = sensor_positions(cfg);
      if (cfg.observations.size() != positions.size()) {
        throw InvalidInput("observations must list one sample array per sensor");
      }
      sc.observations.noise_variance = cfg.noise_variance;
      sc.observations.dimension = 1;
      for (std::size_t i = 0; i < positions.size(); ++i) {
        sc.observations.sensors.push_back({static_cast<int>(i) + 1, {positions[i]}, cfg.observations[i]});
      }
      break;
    }
  }

  const auto locations = sc.observations.locations();
  sc.kernel = CompactKernel(cfg.signal_variance, support_length(cfg));

  switch (cfg.model) {
    case MeanModel::Poisson:
      sc.dynamics = std::make_shared<Poisson1D>(locations, cfg.boundary[0], cfg.boundary[1]);
      break;
    case MeanModel::Spline: {
      std::vector<double> knots;
      for (int k : cfg.knot_indices) {
        if (k < 1 || k > cfg.sensor_count) {
          throw InvalidInput("knot index " + std::to_string(k) + " out of range");
        }
        knots.push_back(locations[static_cast<std::size_t>(k - 1)][0]);
      }
      sc.dynamics = std::make_shared<NaturalSpline>(locations, knots);
      break;
    }
    case MeanModel::Constant:
      sc.dynamics = std::make_shared<ConstantMean>(locations);
      break;
  }

  double lo, hi;
  if (cfg.grid_range) {
    lo = (*cfg.grid_range)[0];
    hi = (*cfg.grid_range)[1];
  } else {
    const auto positions = sensor_positions(cfg);
    lo = *std::min_element(positions.begin(), positions.end());
    hi = *std::max_element(positions.begin(), positions.end());
  }
  if (hi < lo) throw InvalidInput("grid.range must be non-decreasing");
  const int m_count = cfg.grid_count;
  for (int m = 0; m < m_count; ++m) {
    double s = lo;
    if (m_count > 1) s = (m + 1 == m_count) ? hi : lo + (hi - lo) * static_cast<double>(m) / static_cast<double>(m_count - 1);
    sc.grid.points.push_back({s});
  }

  const ParamBox box = sc.dynamics->default_domain();
  Vector init = Vector::Zero(sc.dynamics->num_params());
  if (!cfg.init.empty()) {
    if (static_cast<int>(cfg.init.size()) != sc.dynamics->num_params()) {
      throw InvalidInput("solver.init must have " + std::to_string(sc.dynamics->num_params()) + " entries");
    }
    init = Eigen::Map<const Vector>(cfg.init.data(), static_cast<Eigen::Index>(cfg.init.size()));
  } else if (cfg.model == MeanModel::Poisson) {
    init = 0.5 * (box.lower + box.upper);
  }
  if (!box.contains(init)) throw InvalidInput("solver.init lies outside the hyperparameter domain");
  sc.init = {init, box};

  const InteractionGraph graph = build_interaction_graph(locations, sc.kernel);
  require_valid(sc.observations, sc.grid, graph);
  return sc;
}

// ---------------------------------------------------------------------------
// Pipeline

TrialMetrics compute_metrics(const Scenario& scenario, const MLResult& ml, const Posterior& post) {
  TrialMetrics m;
  if (!scenario.truth) return m;
  m.has_truth = true;
  const int count = scenario.grid.size();
  double se_map = 0.0, se_prior = 0.0;
  int covered = 0;
  for (int k = 0; k < count; ++k) {
    const double truth = scenario.truth(scenario.grid.points[static_cast<std::size_t>(k)][0]);
    se_map += (post.mean[k] - truth) * (post.mean[k] - truth);
    se_prior += (post.prior_mean[k] - truth) * (post.prior_mean[k] - truth);
    if (post.lower95[k] <= truth && truth <= post.upper95[k]) ++covered;
  }
  m.rmse_map = std::sqrt(se_map / count);
  m.rmse_prior = std::sqrt(se_prior / count);
  m.coverage95 = static_cast<double>(covered) / count;
  if (scenario.true_gamma && scenario.true_gamma->size() == ml.gamma_ml.values.size()) {
    for (Eigen::Index k = 0; k < ml.gamma_ml.values.size(); ++k) {
      const double t = (*scenario.true_gamma)[k];
      m.gamma_error.push_back(std::abs(ml.gamma_ml.values[k] - t) / std::abs(t));
    }
  }
  return m;
}

namespace {

SolverSettings solver_for(const Scenario& sc) {
  SolverSettings s = sc.config.solver;
  s.seed = sc.config.seed;
  return s;
}

struct CentralRun {
  MLResult ml;
  Posterior post;
};

CentralRun run_centralized(const Scenario& sc) {
  const MlProblem problem(*sc.dynamics, sc.kernel, sufficient_stats(sc.observations));
  CentralRun r;
  r.ml = fit_ml_multistart(problem, sc.init, solver_for(sc));
  r.post = map_posterior(problem, r.ml, sc.grid);
  return r;
}

struct DistributedRun {
  MLResult ml;
  Posterior post;
  net::NetworkTrace trace;
  double map_vs_central = 0.0;  // local MAP vs map_posterior at the same gamma, z
};

DistributedRun run_distributed(const Scenario& sc) {
  const SufficientStats stats = sufficient_stats(sc.observations);
  net::Network network(sc.observations.locations(), stats, sc.kernel);
  const auto fit = net::distributed_fit_ml_multistart(network, *sc.dynamics, sc.init, solver_for(sc));

  // Nodes keep the state of the selected start for the MAP phase.
  for (int i = 0; i < network.size(); ++i) {
    auto& nd = network.node(i);
    nd.gamma = fit.ml.gamma_ml.values;
    nd.z = fit.ml.z[i];
    nd.mu = fit.ml.mu_gamma[i];
  }

  DistributedRun r;
  r.ml = fit.ml;
  const int m_count = sc.grid.size();
  r.post.prior_mean = sc.dynamics->regression_mean(r.ml.gamma_ml.values, sc.grid);
  r.post.mean.resize(m_count);
  r.post.variance.resize(m_count);
  for (int m = 0; m < m_count; ++m) {
    r.post.mean[m] = net::local_map(network, *sc.dynamics, sc.grid, m);
    r.post.variance[m] = net::local_variance(network, sc.grid, m);
  }
  fill_bounds(r.post);
  r.trace = network.trace();

  const MlProblem problem(*sc.dynamics, sc.kernel, stats);
  const Posterior same = map_posterior(problem, r.ml, sc.grid);
  r.map_vs_central = (same.mean - r.post.mean).lpNorm<Eigen::Infinity>();
  return r;
}

Comparison compare(const CentralRun& c, const DistributedRun& d, const EquivalenceTolerance& tol) {
  Comparison cmp;
  cmp.cost_centralized = c.ml.cost;
  cmp.cost_distributed = d.ml.cost;
  cmp.relative_cost_diff = std::abs(d.ml.cost - c.ml.cost) / (1.0 + std::abs(c.ml.cost));
  cmp.gamma_diff = (d.ml.gamma_ml.values - c.ml.gamma_ml.values).lpNorm<Eigen::Infinity>();
  cmp.map_diff = d.map_vs_central;
  cmp.map_diff_cross = (d.post.mean - c.post.mean).lpNorm<Eigen::Infinity>();
  cmp.variance_diff = (d.post.variance - c.post.variance).lpNorm<Eigen::Infinity>();
  cmp.within_tolerance = cmp.relative_cost_diff <= tol.relative_cost && cmp.gamma_diff <= tol.gamma &&
                         cmp.map_diff <= tol.map;
  return cmp;
}

}  // namespace

PipelineResult run_pipeline(const ScenarioConfig& cfg, Mode mode) {
  PipelineResult out{build_scenario(cfg), {}, {}, {}, std::nullopt, mode};
  const Scenario& sc = out.scenario;
  if (mode == Mode::Centralized) {
    CentralRun c = run_centralized(sc);
    out.ml = std::move(c.ml);
    out.posterior = std::move(c.post);
  } else {
    DistributedRun d = run_distributed(sc);
    const CentralRun c = run_centralized(sc);
    const Comparison cmp = compare(c, d, {});
    if (!cmp.within_tolerance) {
      std::ostringstream os;
      os << "distributed run deviates from centralized: relative cost diff "
         << cmp.relative_cost_diff << ", gamma diff " << cmp.gamma_diff << ", MAP diff "
         << cmp.map_diff;
      throw ToleranceError(os.str());
    }
    out.ml = std::move(d.ml);
    out.posterior = std::move(d.post);
    out.trace = std::move(d.trace);
  }
  out.metrics = compute_metrics(sc, out.ml, out.posterior);
  return out;
}

PipelineResult run_map(const ScenarioConfig& cfg, const Vector& gamma) {
  PipelineResult out{build_scenario(cfg), {}, {}, {}, std::nullopt, Mode::Centralized};
  const Scenario& sc = out.scenario;
  if (gamma.size() != sc.dynamics->num_params()) {
    throw InvalidInput("saved hyperparameters do not match the scenario's mean model");
  }
  const MlProblem problem(*sc.dynamics, sc.kernel, sufficient_stats(sc.observations));
  const CostEvaluation e = ml_cost(problem, gamma);
  out.ml.gamma_ml = {gamma, sc.init.domain};
  out.ml.z = e.z;
  out.ml.mu_gamma = e.mu;
  out.ml.cost = e.cost;
  out.ml.converged = true;
  out.ml.diagnostics.stop_reason = "loaded";
  out.posterior = map_posterior(problem, out.ml, sc.grid);
  out.metrics = compute_metrics(sc, out.ml, out.posterior);
  return out;
}

Comparison compare_modes(const ScenarioConfig& cfg, const EquivalenceTolerance& tol) {
  const Scenario sc = build_scenario(cfg);
  const CentralRun c = run_centralized(sc);
  const DistributedRun d = run_distributed(sc);
  return compare(c, d, tol);
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace {

struct Accumulator {
  std::vector<double> values;
  void add(double v) { values.push_back(v); }
  Aggregate get() const {
    Aggregate a;
    if (values.empty()) return a;
    double sum = 0.0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - a.mean) * (v - a.mean);
    a.stddev = values.size() > 1 ? std::sqrt(sq / static_cast<double>(values.size() - 1)) : 0.0;
    return a;
  }
};

}  // namespace

MonteCarloReport monte_carlo(const ScenarioConfig& cfg, int trials, Mode mode) {
  if (trials < 1) throw InvalidInput("trials must be at least 1");
  MonteCarloReport rep;
  rep.trials = trials;
  Accumulator map, prior, coverage;
  std::vector<Accumulator> gamma;
  std::vector<int> within;
  int all_within = 0;
  long covered = 0, points = 0;
  for (int t = 0; t < trials; ++t) {
    ScenarioConfig trial = cfg;
    trial.seed = cfg.seed + static_cast<std::uint64_t>(t);
    const PipelineResult r = run_pipeline(trial, mode);
    if (!r.metrics.has_truth) continue;
    rep.has_truth = true;
    map.add(r.metrics.rmse_map);
    prior.add(r.metrics.rmse_prior);
    coverage.add(r.metrics.coverage95);
    const int m_count = r.scenario.grid.size();
    covered += std::lround(r.metrics.coverage95 * m_count);
    points += m_count;
    if (gamma.empty()) {
      gamma.resize(r.metrics.gamma_error.size());
      within.assign(r.metrics.gamma_error.size(), 0);
    }
    bool all = !r.metrics.gamma_error.empty();
    for (std::size_t k = 0; k < r.metrics.gamma_error.size(); ++k) {
      gamma[k].add(r.metrics.gamma_error[k]);
      if (r.metrics.gamma_error[k] <= 0.05) {
        ++within[k];
      } else {
        all = false;
      }
    }
    if (all) ++all_within;
  }
  rep.rmse_map = map.get();
  rep.rmse_prior = prior.get();
  rep.coverage95 = coverage.get();
  rep.pooled_coverage95 = points > 0 ? static_cast<double>(covered) / static_cast<double>(points) : 0.0;
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    rep.gamma_error.push_back(gamma[k].get());
    rep.gamma_within_5pct.push_back(static_cast<double>(within[k]) / trials);
  }
  rep.all_within_5pct = static_cast<double>(all_within) / trials;
  return rep;
}

// ---------------------------------------------------------------------------
// Output

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

ordered_json aggregate_json(const Aggregate& a) { return {{"mean", a.mean}, {"std", a.stddev}}; }

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

void write_points(const ObservationSet& obs, const std::filesystem::path& path) {
  const SufficientStats stats = sufficient_stats(obs);
  auto out = open_out(path);
  out << "id,s,xbar,L,sample_index,sample\n";
  for (int i = 0; i < obs.size(); ++i) {
    const auto& s = obs.sensors[static_cast<std::size_t>(i)];
    for (std::size_t l = 0; l < s.observations.size(); ++l) {
      out << s.id << ',' << format_number(s.location.at(0)) << ',' << format_number(stats.xbar[i])
          << ',' << s.observations.size() << ',' << (l + 1) << ',' << format_number(s.observations[l])
          << '\n';
    }
  }
}

}  // namespace

std::string to_json(const MonteCarloReport& r) {
  ordered_json j;
  j["trials"] = r.trials;
  j["has_truth"] = r.has_truth;
  j["rmse_map"] = aggregate_json(r.rmse_map);
  j["rmse_prior"] = aggregate_json(r.rmse_prior);
  j["coverage95"] = aggregate_json(r.coverage95);
  j["pooled_coverage95"] = r.pooled_coverage95;
  ordered_json g = ordered_json::array();
  for (const auto& a : r.gamma_error) g.push_back(aggregate_json(a));
  j["gamma_error"] = g;
  j["gamma_within_5pct"] = r.gamma_within_5pct;
  j["all_within_5pct"] = r.all_within_5pct;
  return j.dump(2) + "\n";
}

std::string to_json(const Comparison& c) {
  ordered_json j;
  j["cost_centralized"] = c.cost_centralized;
  j["cost_distributed"] = c.cost_distributed;
  j["relative_cost_diff"] = c.relative_cost_diff;
  j["gamma_max_abs_diff"] = c.gamma_diff;
  j["map_max_abs_diff_same_gamma"] = c.map_diff;
  j["map_max_abs_diff"] = c.map_diff_cross;
  j["variance_max_abs_diff"] = c.variance_diff;
  j["within_tolerance"] = c.within_tolerance;
  return j.dump(2) + "\n";
}

std::string to_json(const MLResult& ml) {
  ordered_json j;
  j["gamma"] = to_std(ml.gamma_ml.values);
  ordered_json lower = ordered_json::array(), upper = ordered_json::array();
  for (Eigen::Index k = 0; k < ml.gamma_ml.domain.lower.size(); ++k) {
    const double lo = ml.gamma_ml.domain.lower[k], hi = ml.gamma_ml.domain.upper[k];
    lower.push_back(std::isfinite(lo) ? ordered_json(lo) : ordered_json(nullptr));
    upper.push_back(std::isfinite(hi) ? ordered_json(hi) : ordered_json(nullptr));
  }
  j["domain"] = {{"lower", lower}, {"upper", upper}};
  j["z"] = to_std(ml.z);
  j["mu"] = to_std(ml.mu_gamma);
  j["cost"] = ml.cost;
  j["iterations"] = ml.iterations;
  j["converged"] = ml.converged;
  const auto& d = ml.diagnostics;
  ordered_json diag;
  diag["stop_reason"] = d.stop_reason;
  diag["gradient_norm"] = d.gradient_norm;
  diag["best_start"] = d.best_start;
  diag["line_search_evaluations"] = d.line_search_evaluations;
  diag["tol"] = d.settings.tol;
  diag["max_iters"] = d.settings.max_iters;
  diag["starts"] = d.settings.starts;
  diag["seed"] = d.settings.seed;
  diag["armijo_slope"] = d.settings.armijo_slope;
  diag["backtrack"] = d.settings.backtrack;
  diag["max_backtracks"] = d.settings.max_backtracks;
  diag["cost_history"] = d.cost_history;
  j["diagnostics"] = diag;
  return j.dump(2) + "\n";
}

std::string to_json(const TrialMetrics& m) {
  ordered_json j;
  j["has_truth"] = m.has_truth;
  if (m.has_truth) {
    j["rmse_map"] = m.rmse_map;
    j["rmse_prior"] = m.rmse_prior;
    j["coverage95"] = m.coverage95;
    j["gamma_error"] = m.gamma_error;
  }
  return j.dump(2) + "\n";
}

Vector read_gamma(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  json j;
  try {
    in >> j;
    const auto g = j.at("gamma").get<std::vector<double>>();
    return Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
  } catch (const json::exception& e) {
    throw InvalidInput("malformed ML result " + path.string() + ": " + e.what());
  }
}

void emit_plotdata(const PipelineResult& result, const std::filesystem::path& dir) {
  const auto& sc = result.scenario;
  const auto& post = result.posterior;
  {
    auto out = open_out(dir / "posterior.csv");
    out << "s,truth,prior_mean,map_mean,lower95,upper95\n";
    for (int m = 0; m < sc.grid.size(); ++m) {
      const double s = sc.grid.points[static_cast<std::size_t>(m)].at(0);
      const std::string truth = sc.truth ? format_number(sc.truth(s)) : "nan";
      out << format_number(s) << ',' << truth << ',' << format_number(post.prior_mean[m]) << ','
          << format_number(post.mean[m]) << ',' << format_number(post.lower95[m]) << ','
          << format_number(post.upper95[m]) << '\n';
    }
  }
  write_points(sc.observations, dir / "points.csv");
}

void write_results(const PipelineResult& result, const std::filesystem::path& dir) {
  emit_plotdata(result, dir);
  open_out(dir / "ml_result.json") << to_json(result.ml);
  open_out(dir / "metrics.json") << to_json(result.metrics);
  open_out(dir / "scenario.json") << serialize_config(result.scenario.config);
  if (result.trace) {
    auto out = open_out(dir / "trace.csv");
    result.trace->write_csv(out);
  }
}

void write_dataset(const Scenario& scenario, const std::filesystem::path& dir) {
  write_points(scenario.observations, dir / "points.csv");
  ScenarioConfig custom = scenario.config;
  custom.kind = ScenarioKind::Custom;
  custom.observations.clear();
  custom.observations_per_sensor.clear();
  for (const auto& s : scenario.observations.sensors) {
    custom.observations.push_back(s.observations);
    custom.observations_per_sensor.push_back(static_cast<int>(s.observations.size()));
  }
  open_out(dir / "dataset.json") << serialize_config(custom);
}

}  // namespace ebf::harness
