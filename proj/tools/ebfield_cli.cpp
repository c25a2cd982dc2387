// Command-line front end; talks to the library through the C interface only.

#include "ebf/ebf.h"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitBadInput = 3;

struct ScenarioArgs {
  std::string scenario;
  std::string kind = "temperature";
  std::optional<std::uint64_t> seed;
};

struct Scenario {
  ebf_scenario* handle = nullptr;
  ~Scenario() { ebf_scenario_free(handle); }
};

struct Run {
  ebf_run* handle = nullptr;
  ~Run() { ebf_run_free(handle); }
};

struct OwnedString {
  char* text = nullptr;
  ~OwnedString() { ebf_string_free(text); }
};

int report(ebf_status status) {
  if (status != EBF_OK) std::cerr << "error: " << ebf_last_error() << "\n";
  return static_cast<int>(status);
}

void add_scenario_options(CLI::App* cmd, ScenarioArgs& args) {
  cmd->add_option("--scenario", args.scenario, "Scenario config file (JSON)");
  cmd->add_option("--kind", args.kind, "Built-in scenario when no file is given")
      ->check(CLI::IsMember({"temperature", "spline"}));
  cmd->add_option("--seed", args.seed, "Override the scenario seed");
}

ebf_status load(const ScenarioArgs& args, Scenario& sc) {
  ebf_status st;
  if (!args.scenario.empty()) {
    st = ebf_scenario_from_file(args.scenario.c_str(), &sc.handle);
  } else {
    st = ebf_scenario_default(args.kind == "spline" ? EBF_KIND_SPLINE : EBF_KIND_TEMPERATURE, &sc.handle);
  }
  if (st == EBF_OK && args.seed) st = ebf_scenario_set_seed(sc.handle, *args.seed);
  return st;
}

std::string default_out() {
  const char* env = std::getenv("EBF_OUT_DIR");
  return (env != nullptr && *env != '\0') ? env : "ebf_out";
}

ebf_mode mode_of(const std::string& s) {
  return s == "distributed" ? EBF_MODE_DISTRIBUTED : EBF_MODE_CENTRALIZED;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical Bayes estimation of a spatial field on a sensor network"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ebf_version()));

  ScenarioArgs sargs;
  std::string out = default_out();
  std::string mode = "centralized";
  std::string ml_path;
  int trials = 500;

  auto* config = app.add_subcommand("config", "Print a scenario config with every field spelled out");
  add_scenario_options(config, sargs);

  auto* generate = app.add_subcommand("generate", "Draw synthetic data; writes points.csv and dataset.json");
  add_scenario_options(generate, sargs);
  generate->add_option("--out", out, "Output directory (default $EBF_OUT_DIR or ./ebf_out)");

  auto* fit = app.add_subcommand("fit", "ML hyperparameters and MAP field");
  add_scenario_options(fit, sargs);
  fit->add_option("--mode", mode)->check(CLI::IsMember({"centralized", "distributed"}));
  fit->add_option("--out", out, "Output directory (default $EBF_OUT_DIR or ./ebf_out)");

  auto* map = app.add_subcommand("map", "MAP field from a saved ml_result.json");
  add_scenario_options(map, sargs);
  map->add_option("--ml", ml_path, "ml_result.json from a previous fit")->required()->check(CLI::ExistingFile);
  map->add_option("--out", out, "Output directory (default $EBF_OUT_DIR or ./ebf_out)");

  auto* montecarlo = app.add_subcommand("montecarlo", "Repeat the pipeline over seeds seed, seed+1, ...");
  add_scenario_options(montecarlo, sargs);
  montecarlo->add_option("--trials", trials)->check(CLI::PositiveNumber);
  montecarlo->add_option("--mode", mode)->check(CLI::IsMember({"centralized", "distributed"}));

  auto* compare = app.add_subcommand("compare", "Run both modes and report the largest deviations");
  add_scenario_options(compare, sargs);

  auto* plotdata = app.add_subcommand("plotdata", "Fit, then write posterior.csv and points.csv only");
  add_scenario_options(plotdata, sargs);
  plotdata->add_option("--mode", mode)->check(CLI::IsMember({"centralized", "distributed"}));
  plotdata->add_option("--out", out, "Output directory (default $EBF_OUT_DIR or ./ebf_out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadInput;
  }

  Scenario sc;
  if (ebf_status st = load(sargs, sc); st != EBF_OK) return report(st);

  if (*config) {
    OwnedString text;
    if (ebf_status st = ebf_scenario_to_json(sc.handle, &text.text); st != EBF_OK) return report(st);
    std::cout << text.text;
    return 0;
  }
  if (*generate) {
    if (ebf_status st = ebf_generate(sc.handle, out.c_str()); st != EBF_OK) return report(st);
    std::cout << "wrote " << out << "/points.csv and " << out << "/dataset.json\n";
    return 0;
  }
  if (*fit || *plotdata || *map) {
    Run run;
    ebf_status st = *map ? ebf_map_from_file(sc.handle, ml_path.c_str(), &run.handle)
                         : ebf_fit(sc.handle, mode_of(mode), &run.handle);
    if (st != EBF_OK) return report(st);
    st = *plotdata ? ebf_run_write_plotdata(run.handle, out.c_str()) : ebf_run_write(run.handle, out.c_str());
    if (st != EBF_OK) return report(st);
    OwnedString summary;
    if (st = ebf_run_summary_json(run.handle, &summary.text); st != EBF_OK) return report(st);
    std::cout << summary.text;
    return 0;
  }
  if (*montecarlo) {
    OwnedString text;
    if (ebf_status st = ebf_montecarlo(sc.handle, trials, mode_of(mode), &text.text); st != EBF_OK) {
      return report(st);
    }
    std::cout << text.text;
    return 0;
  }
  if (*compare) {
    OwnedString text;
    int within = 0;
    if (ebf_status st = ebf_compare(sc.handle, &text.text, &within); st != EBF_OK) return report(st);
    std::cout << text.text;
    if (!within) {
      std::cerr << "error: distributed and centralized results differ beyond tolerance\n";
      return EBF_ERR_TOLERANCE;
    }
    return 0;
  }
  return kExitBadInput;
}
