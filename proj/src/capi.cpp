#include "ebf/ebf.h"

#include "ebf/error.hpp"
#include "ebf/harness.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

struct ebf_scenario {
  ebf::harness::ScenarioConfig config;
};

struct ebf_run {
  ebf::harness::PipelineResult result;
};

namespace {

thread_local std::string g_last_error;

ebf_status fail(ebf_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename F>
ebf_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return EBF_OK;
  } catch (const ebf::Error& e) {
    switch (e.kind()) {
      case ebf::ErrorKind::Tolerance: return fail(EBF_ERR_TOLERANCE, e.what());
      case ebf::ErrorKind::Solver: return fail(EBF_ERR_SOLVER, e.what());
      case ebf::ErrorKind::InvalidInput: return fail(EBF_ERR_INPUT, e.what());
    }
    return fail(EBF_ERR_INPUT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(EBF_ERR_SOLVER, "out of memory");
  } catch (const std::exception& e) {
    return fail(EBF_ERR_SOLVER, std::string("internal error: ") + e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw ebf::InvalidInput(what);
}

ebf::harness::Mode to_mode(ebf_mode mode) {
  switch (mode) {
    case EBF_MODE_CENTRALIZED: return ebf::harness::Mode::Centralized;
    case EBF_MODE_DISTRIBUTED: return ebf::harness::Mode::Distributed;
  }
  throw ebf::InvalidInput("unknown mode");
}

}  // namespace

extern "C" {

const char* ebf_version(void) { return "1.0.0"; }

const char* ebf_last_error(void) { return g_last_error.c_str(); }

void ebf_string_free(char* s) { std::free(s); }

ebf_status ebf_scenario_default(ebf_kind kind, ebf_scenario** out) {
  return guarded([&] {
    require(out != nullptr, "null output pointer");
    ebf::harness::ScenarioKind k;
    switch (kind) {
      case EBF_KIND_TEMPERATURE: k = ebf::harness::ScenarioKind::Temperature; break;
      case EBF_KIND_SPLINE: k = ebf::harness::ScenarioKind::Spline; break;
      default: throw ebf::InvalidInput("unknown scenario kind");
    }
    *out = new ebf_scenario{ebf::harness::default_config(k)};
  });
}

ebf_status ebf_scenario_from_json(const char* json_text, ebf_scenario** out) {
  return guarded([&] {
    require(json_text != nullptr && out != nullptr, "null argument");
    *out = new ebf_scenario{ebf::harness::parse_config(json_text)};
  });
}

ebf_status ebf_scenario_from_file(const char* path, ebf_scenario** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new ebf_scenario{ebf::harness::load_config(path)};
  });
}

ebf_status ebf_scenario_set_seed(ebf_scenario* sc, uint64_t seed) {
  return guarded([&] {
    require(sc != nullptr, "null scenario");
    sc->config.seed = seed;
  });
}

ebf_status ebf_scenario_to_json(const ebf_scenario* sc, char** out) {
  return guarded([&] {
    require(sc != nullptr && out != nullptr, "null argument");
    *out = dup_string(ebf::harness::serialize_config(sc->config));
  });
}

void ebf_scenario_free(ebf_scenario* sc) { delete sc; }

ebf_status ebf_generate(const ebf_scenario* sc, const char* dir) {
  return guarded([&] {
    require(sc != nullptr && dir != nullptr, "null argument");
    ebf::harness::write_dataset(ebf::harness::build_scenario(sc->config), dir);
  });
}

ebf_status ebf_fit(const ebf_scenario* sc, ebf_mode mode, ebf_run** out) {
  return guarded([&] {
    require(sc != nullptr && out != nullptr, "null argument");
    *out = new ebf_run{ebf::harness::run_pipeline(sc->config, to_mode(mode))};
  });
}

ebf_status ebf_map_from_file(const ebf_scenario* sc, const char* ml_result_path, ebf_run** out) {
  return guarded([&] {
    require(sc != nullptr && ml_result_path != nullptr && out != nullptr, "null argument");
    const ebf::Vector gamma = ebf::harness::read_gamma(ml_result_path);
    *out = new ebf_run{ebf::harness::run_map(sc->config, gamma)};
  });
}

ebf_status ebf_run_write(const ebf_run* run, const char* dir) {
  return guarded([&] {
    require(run != nullptr && dir != nullptr, "null argument");
    ebf::harness::write_results(run->result, dir);
  });
}

ebf_status ebf_run_write_plotdata(const ebf_run* run, const char* dir) {
  return guarded([&] {
    require(run != nullptr && dir != nullptr, "null argument");
    ebf::harness::emit_plotdata(run->result, dir);
  });
}

ebf_status ebf_run_gamma(const ebf_run* run, double* gamma, size_t cap, size_t* len) {
  return guarded([&] {
    require(run != nullptr && len != nullptr, "null argument");
    const auto& g = run->result.ml.gamma_ml.values;
    *len = static_cast<size_t>(g.size());
    require(gamma != nullptr || cap == 0, "null gamma buffer");
    for (size_t k = 0; k < cap && k < *len; ++k) gamma[k] = g[static_cast<Eigen::Index>(k)];
  });
}

ebf_status ebf_run_cost(const ebf_run* run, double* cost) {
  return guarded([&] {
    require(run != nullptr && cost != nullptr, "null argument");
    *cost = run->result.ml.cost;
  });
}

ebf_status ebf_run_metrics(const ebf_run* run, ebf_metrics* out) {
  return guarded([&] {
    require(run != nullptr && out != nullptr, "null argument");
    const auto& m = run->result.metrics;
    *out = {m.has_truth ? 1 : 0, m.rmse_map, m.rmse_prior, m.coverage95};
  });
}

ebf_status ebf_run_summary_json(const ebf_run* run, char** out) {
  return guarded([&] {
    require(run != nullptr && out != nullptr, "null argument");
    const auto& r = run->result;
    nlohmann::ordered_json j;
    j["mode"] = ebf::harness::to_string(r.mode);
    j["ml"] = nlohmann::ordered_json::parse(ebf::harness::to_json(r.ml));
    j["metrics"] = nlohmann::ordered_json::parse(ebf::harness::to_json(r.metrics));
    if (r.trace) {
      j["network"] = {{"rounds", r.trace->rounds()},
                      {"messages", r.trace->messages()},
                      {"scalars", r.trace->scalars()}};
    }
    *out = dup_string(j.dump(2) + "\n");
  });
}

void ebf_run_free(ebf_run* run) { delete run; }

ebf_status ebf_montecarlo(const ebf_scenario* sc, int trials, ebf_mode mode, char** report) {
  return guarded([&] {
    require(sc != nullptr && report != nullptr, "null argument");
    *report = dup_string(ebf::harness::to_json(ebf::harness::monte_carlo(sc->config, trials, to_mode(mode))));
  });
}

ebf_status ebf_compare(const ebf_scenario* sc, char** report, int* within) {
  return guarded([&] {
    require(sc != nullptr && report != nullptr && within != nullptr, "null argument");
    const auto cmp = ebf::harness::compare_modes(sc->config);
    *within = cmp.within_tolerance ? 1 : 0;
    *report = dup_string(ebf::harness::to_json(cmp));
  });
}

ebf_status ebf_kernel_eval(double signal_variance, double support_length, const double* a,
                           const double* b, size_t dim, double* out) {
  return guarded([&] {
    require(a != nullptr && b != nullptr && out != nullptr, "null argument");
    const ebf::CompactKernel k(signal_variance, support_length);
    *out = ebf::kernel_eval(k, ebf::Point(a, a + dim), ebf::Point(b, b + dim));
  });
}

}  // extern "C"
