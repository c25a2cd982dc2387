/* C interface to the ebfield library.
 *
 * Every function returns an ebf_status. On failure the message is available
 * from ebf_last_error() until the next call on the same thread. Strings
 * returned through out-parameters are owned by the caller and released with
 * ebf_string_free().
 */
#ifndef EBF_EBF_H
#define EBF_EBF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EBF_API __declspec(dllexport)
#else
#define EBF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ebf_status {
  EBF_OK = 0,
  EBF_ERR_TOLERANCE = 1, /* distributed run disagrees with centralized */
  EBF_ERR_SOLVER = 2,    /* factorization or iteration failure */
  EBF_ERR_INPUT = 3      /* invalid configuration, data or arguments */
} ebf_status;

typedef enum ebf_kind { EBF_KIND_TEMPERATURE = 0, EBF_KIND_SPLINE = 1 } ebf_kind;
typedef enum ebf_mode { EBF_MODE_CENTRALIZED = 0, EBF_MODE_DISTRIBUTED = 1 } ebf_mode;

typedef struct ebf_scenario ebf_scenario;
typedef struct ebf_run ebf_run;

typedef struct ebf_metrics {
  int has_truth;
  double rmse_map;
  double rmse_prior;
  double coverage95;
} ebf_metrics;

EBF_API const char* ebf_version(void);
EBF_API const char* ebf_last_error(void);
EBF_API void ebf_string_free(char* s);

EBF_API ebf_status ebf_scenario_default(ebf_kind kind, ebf_scenario** out);
EBF_API ebf_status ebf_scenario_from_json(const char* json_text, ebf_scenario** out);
EBF_API ebf_status ebf_scenario_from_file(const char* path, ebf_scenario** out);
EBF_API ebf_status ebf_scenario_set_seed(ebf_scenario* sc, uint64_t seed);
/* Canonical JSON of the configuration. */
EBF_API ebf_status ebf_scenario_to_json(const ebf_scenario* sc, char** out);
EBF_API void ebf_scenario_free(ebf_scenario* sc);

/* Draws the synthetic data and writes points.csv and dataset.json to dir. */
EBF_API ebf_status ebf_generate(const ebf_scenario* sc, const char* dir);

/* ML fit plus MAP regression. */
EBF_API ebf_status ebf_fit(const ebf_scenario* sc, ebf_mode mode, ebf_run** out);
/* MAP regression at hyperparameters read from an ml_result.json. */
EBF_API ebf_status ebf_map_from_file(const ebf_scenario* sc, const char* ml_result_path, ebf_run** out);

/* ml_result.json, metrics.json, scenario.json, posterior.csv, points.csv and,
 * for distributed runs, trace.csv. */
EBF_API ebf_status ebf_run_write(const ebf_run* run, const char* dir);
/* posterior.csv and points.csv only. */
EBF_API ebf_status ebf_run_write_plotdata(const ebf_run* run, const char* dir);
/* Copies up to cap entries; *len receives the full length. */
EBF_API ebf_status ebf_run_gamma(const ebf_run* run, double* gamma, size_t cap, size_t* len);
EBF_API ebf_status ebf_run_cost(const ebf_run* run, double* cost);
EBF_API ebf_status ebf_run_metrics(const ebf_run* run, ebf_metrics* out);
EBF_API ebf_status ebf_run_summary_json(const ebf_run* run, char** out);
EBF_API void ebf_run_free(ebf_run* run);

/* Trials use seeds seed, seed + 1, ...; the report is JSON. */
EBF_API ebf_status ebf_montecarlo(const ebf_scenario* sc, int trials, ebf_mode mode, char** report);
/* Runs both modes; *within is 1 when the equivalence tolerances hold. */
EBF_API ebf_status ebf_compare(const ebf_scenario* sc, char** report, int* within);

/* Compact kernel between two points of dimension dim. */
EBF_API ebf_status ebf_kernel_eval(double signal_variance, double support_length, const double* a,
                                   const double* b, size_t dim, double* out);

#ifdef __cplusplus
}
#endif

#endif
