#include "ebf/ebf.h"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

TEST_CASE("version and kernel evaluation") {
  CHECK(std::string(ebf_version()).size() > 0);
  const double a[1] = {0.0}, b[1] = {1.5};
  double k = 0.0;
  REQUIRE(ebf_kernel_eval(1.0, 3.0, a, b, 1, &k) == EBF_OK);
  CHECK(k == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(ebf_kernel_eval(-1.0, 3.0, a, b, 1, &k) == EBF_ERR_INPUT);
  CHECK(std::strlen(ebf_last_error()) > 0);
  CHECK(ebf_kernel_eval(1.0, 3.0, nullptr, b, 1, &k) == EBF_ERR_INPUT);
}

TEST_CASE("scenario handles") {
  ebf_scenario* sc = nullptr;
  REQUIRE(ebf_scenario_default(EBF_KIND_SPLINE, &sc) == EBF_OK);
  REQUIRE(ebf_scenario_set_seed(sc, 17) == EBF_OK);
  char* text = nullptr;
  REQUIRE(ebf_scenario_to_json(sc, &text) == EBF_OK);
  CHECK(std::string(text).find("\"seed\": 17") != std::string::npos);

  ebf_scenario* copy = nullptr;
  REQUIRE(ebf_scenario_from_json(text, &copy) == EBF_OK);
  char* text2 = nullptr;
  REQUIRE(ebf_scenario_to_json(copy, &text2) == EBF_OK);
  CHECK(std::string(text) == std::string(text2));
  ebf_string_free(text);
  ebf_string_free(text2);
  ebf_scenario_free(copy);
  ebf_scenario_free(sc);

  ebf_scenario* bad = nullptr;
  CHECK(ebf_scenario_from_json("{\"kind\": \"nope\"}", &bad) == EBF_ERR_INPUT);
  CHECK(bad == nullptr);
  CHECK(ebf_scenario_from_file("/nonexistent/ebf.json", &bad) == EBF_ERR_INPUT);
}

TEST_CASE("fit, inspect and write") {
  ebf_scenario* sc = nullptr;
  REQUIRE(ebf_scenario_default(EBF_KIND_TEMPERATURE, &sc) == EBF_OK);
  ebf_run* run = nullptr;
  REQUIRE(ebf_fit(sc, EBF_MODE_DISTRIBUTED, &run) == EBF_OK);

  size_t len = 0;
  REQUIRE(ebf_run_gamma(run, nullptr, 0, &len) == EBF_OK);
  CHECK(len == 3);
  double gamma[3];
  REQUIRE(ebf_run_gamma(run, gamma, 3, &len) == EBF_OK);
  CHECK(std::abs(gamma[1] - 3.0) < 0.15);

  double cost = -1.0;
  REQUIRE(ebf_run_cost(run, &cost) == EBF_OK);
  CHECK(cost >= 0.0);

  ebf_metrics m{};
  REQUIRE(ebf_run_metrics(run, &m) == EBF_OK);
  CHECK(m.has_truth == 1);
  CHECK(m.coverage95 >= 0.0);
  CHECK(m.coverage95 <= 1.0);

  char* summary = nullptr;
  REQUIRE(ebf_run_summary_json(run, &summary) == EBF_OK);
  CHECK(std::string(summary).find("\"network\"") != std::string::npos);
  ebf_string_free(summary);

  const auto dir = std::filesystem::temp_directory_path() / "ebf_capi_fit";
  std::filesystem::remove_all(dir);
  REQUIRE(ebf_run_write(run, dir.c_str()) == EBF_OK);
  CHECK(std::filesystem::exists(dir / "trace.csv"));

  ebf_run* again = nullptr;
  REQUIRE(ebf_map_from_file(sc, (dir / "ml_result.json").c_str(), &again) == EBF_OK);
  double gamma2[3];
  REQUIRE(ebf_run_gamma(again, gamma2, 3, &len) == EBF_OK);
  CHECK(gamma2[0] == gamma[0]);
  ebf_run_free(again);

  CHECK(ebf_run_write(run, "/proc/ebf_cannot_write_here") == EBF_ERR_INPUT);
  ebf_run_free(run);
  ebf_scenario_free(sc);
}

TEST_CASE("compare and monte carlo through the C interface") {
  ebf_scenario* sc = nullptr;
  REQUIRE(ebf_scenario_default(EBF_KIND_SPLINE, &sc) == EBF_OK);
  char* report = nullptr;
  int within = 0;
  REQUIRE(ebf_compare(sc, &report, &within) == EBF_OK);
  CHECK(within == 1);
  ebf_string_free(report);
  REQUIRE(ebf_montecarlo(sc, 3, EBF_MODE_CENTRALIZED, &report) == EBF_OK);
  CHECK(std::string(report).find("\"trials\": 3") != std::string::npos);
  ebf_string_free(report);
  CHECK(ebf_montecarlo(sc, 0, EBF_MODE_CENTRALIZED, &report) == EBF_ERR_INPUT);
  ebf_scenario_free(sc);
}

TEST_CASE("a disconnected network is reported as bad input") {
  // The third sensor is out of range, so the distributed fit has no
  // reduction tree; the centralized fit does not need one.
  const char* text = R"({
    "kind": "custom", "seed": 1,
    "sensors": {"count": 3, "positions": [0, 0.5, 10]},
    "noise_variance": 0.5,
    "kernel": {"signal_variance": 1.0, "support_length": 1.0},
    "dynamics": {"model": "constant"},
    "grid": {"count": 3},
    "observations": [[1.0], [0.9], [1.1]]
  })";
  ebf_scenario* sc = nullptr;
  REQUIRE(ebf_scenario_from_json(text, &sc) == EBF_OK);
  ebf_run* run = nullptr;
  CHECK(ebf_fit(sc, EBF_MODE_CENTRALIZED, &run) == EBF_OK);
  ebf_run_free(run);
  run = nullptr;
  CHECK(ebf_fit(sc, EBF_MODE_DISTRIBUTED, &run) == EBF_ERR_INPUT);
  CHECK(std::string(ebf_last_error()).find("disconnected") != std::string::npos);
  ebf_scenario_free(sc);
}
