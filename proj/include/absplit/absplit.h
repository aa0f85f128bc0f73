/* Asymmetric budget split experiments: C interface.
 *
 * All objects are opaque handles created by *_new / producing calls and
 * released with the matching *_free. Functions return an absplit_status; on
 * failure absplit_last_error() describes the problem for the calling thread.
 * Strings returned by accessors stay valid until the owning handle is freed.
 * Money is passed as int64 minor currency units.
 */
#ifndef ABSPLIT_ABSPLIT_H
#define ABSPLIT_ABSPLIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(ABSPLIT_BUILDING_LIBRARY)
#define ABSPLIT_API __attribute__((visibility("default")))
#else
#define ABSPLIT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum absplit_status {
  ABSPLIT_OK = 0,
  ABSPLIT_ERR_INVALID_ARGUMENT = 1,
  ABSPLIT_ERR_IO = 2,
  ABSPLIT_ERR_PARSE = 3,
  ABSPLIT_ERR_DATA = 4,
  ABSPLIT_ERR_ESTIMATION = 5,
  ABSPLIT_ERR_INTERNAL = 6
} absplit_status;

/* Sub-market and allocation codes. */
enum { ABSPLIT_M1 = 1, ABSPLIT_M2 = 2 };
enum { ABSPLIT_ALLOCATION_I = 1, ABSPLIT_ALLOCATION_II = 2 };

typedef struct absplit_split_config absplit_split_config;
typedef struct absplit_sim_config absplit_sim_config;
typedef struct absplit_dataset absplit_dataset;
typedef struct absplit_report absplit_report;

ABSPLIT_API const char* absplit_version(void);
ABSPLIT_API int absplit_format_version(void);
ABSPLIT_API const char* absplit_status_string(absplit_status status);
ABSPLIT_API const char* absplit_last_error(void);

/* Split configuration. alpha must lie in (0.5, 1) unless symmetric mode is
 * enabled, which also admits 0.5. */
ABSPLIT_API absplit_status absplit_split_config_new(double alpha, uint64_t seed, absplit_split_config** out);
ABSPLIT_API absplit_status absplit_split_config_set_symmetric(absplit_split_config* config, int allow);
/* NULL keeps the current namespace. */
ABSPLIT_API absplit_status absplit_split_config_set_namespaces(absplit_split_config* config, const char* user,
                                                               const char* copy, const char* side_effect);
ABSPLIT_API void absplit_split_config_free(absplit_split_config* config);

ABSPLIT_API absplit_status absplit_assign_user(const absplit_split_config* config, const char* user_id,
                                               int* submarket);
ABSPLIT_API absplit_status absplit_allocate_copies(const absplit_split_config* config, const char* ad_id,
                                                   int* allocation);
ABSPLIT_API absplit_status absplit_split_budget(int64_t total_minor, double alpha, int64_t* high_minor,
                                                int64_t* low_minor);
/* Writes user_assignment.csv and ads_assignment.csv into out_dir. */
ABSPLIT_API absplit_status absplit_split_files(const absplit_split_config* config, const char* users_path,
                                               const char* ads_path, const char* out_dir, absplit_report** out);

/* Simulation configuration from a JSON object; "{}" gives the defaults. */
ABSPLIT_API absplit_status absplit_sim_config_from_json(const char* json, absplit_sim_config** out);
ABSPLIT_API absplit_status absplit_sim_config_set_seed(absplit_sim_config* config, uint64_t seed);
/* Effective configuration as JSON (owned by the report). */
ABSPLIT_API absplit_status absplit_sim_config_describe(const absplit_sim_config* config, absplit_report** out);
ABSPLIT_API void absplit_sim_config_free(absplit_sim_config* config);

/* Writes users.csv, ads.csv and latent.csv into out_dir. */
ABSPLIT_API absplit_status absplit_generate(const absplit_sim_config* config, const char* out_dir,
                                            absplit_report** out);
/* latent_path and truth_path may be NULL. */
ABSPLIT_API absplit_status absplit_simulate_files(const absplit_sim_config* config, const char* user_assignment_path,
                                                  const char* ads_assignment_path, const char* latent_path,
                                                  const char* interactions_path, const char* truth_path,
                                                  absplit_report** out);

/* Estimation dataset. outcome_kind is "impression", "click" or
 * "conversion". build_report may be NULL. */
ABSPLIT_API absplit_status absplit_dataset_build(const char* user_assignment_path, const char* ads_assignment_path,
                                                 const char* interactions_path, const char* outcome_kind, int lenient,
                                                 absplit_dataset** out, absplit_report** build_report);
ABSPLIT_API absplit_status absplit_dataset_load(const char* estimation_path, absplit_dataset** out);
ABSPLIT_API absplit_status absplit_dataset_save(const absplit_dataset* dataset, const char* estimation_path);
ABSPLIT_API size_t absplit_dataset_rows(const absplit_dataset* dataset);
ABSPLIT_API void absplit_dataset_free(absplit_dataset* dataset);

/* spec_json keys: fixed_effects, controls, weights, confidence_level,
 * segment_by, naive. NULL means defaults. */
ABSPLIT_API absplit_status absplit_estimate(const absplit_dataset* dataset, const char* spec_json,
                                            absplit_report** out);
ABSPLIT_API absplit_status absplit_estimate_lift(const absplit_dataset* dataset, const char* spec_json,
                                                 absplit_report** out);

/* segment_feature may be NULL. The report's passed flag is the verdict. */
ABSPLIT_API absplit_status absplit_balance(const char* ads_assignment_path, double significance,
                                           const char* segment_feature, absplit_report** out);

/* options_json keys: alphas, replications, power, size, threads,
 * fixed_effects, weights. */
ABSPLIT_API absplit_status absplit_power(const absplit_sim_config* config, const char* options_json,
                                         absplit_report** out);

/* With ads_path NULL the population is generated from the simulation config;
 * otherwise users_path (needed by the auction form) and latent_path may be
 * NULL. */
ABSPLIT_API absplit_status absplit_side_effect(const absplit_sim_config* sim, const absplit_split_config* split,
                                               double alpha1, double significance, const char* users_path,
                                               const char* ads_path, const char* latent_path, absplit_report** out);

/* Forecast from an incrementality result record (one JSON line). */
ABSPLIT_API absplit_status absplit_forecast(const char* result_json, int64_t baseline_budget_minor,
                                            double baseline_outcome, const int64_t* levels, size_t n_levels,
                                            absplit_report** out);
/* Same, with the baseline taken from an ad of the dataset. */
ABSPLIT_API absplit_status absplit_forecast_for_ad(const char* result_json, const absplit_dataset* dataset,
                                                   const char* ad_id, const int64_t* levels, size_t n_levels,
                                                   absplit_report** out);

/* generate, split, simulate, build and estimate inside out_dir. */
ABSPLIT_API absplit_status absplit_run_all(const absplit_sim_config* sim, const absplit_split_config* split,
                                           const char* spec_json, const char* out_dir, absplit_report** out);

ABSPLIT_API const char* absplit_report_json(const absplit_report* report);
ABSPLIT_API const char* absplit_report_table(const absplit_report* report);
ABSPLIT_API const char* absplit_report_csv(const absplit_report* report);
ABSPLIT_API int absplit_report_passed(const absplit_report* report);
ABSPLIT_API void absplit_report_free(absplit_report* report);

#ifdef __cplusplus
}
#endif

#endif /* ABSPLIT_ABSPLIT_H */
