/*
 * C interface to the iqscore library.
 *
 * Every function returns an iq_status. On failure, iq_last_error() returns a
 * thread-local message describing the most recent error on the calling
 * thread. Objects are opaque handles released with their matching *_free.
 * Strings returned through char** out-parameters are heap-allocated and must
 * be released with iq_string_free.
 */
#ifndef IQSCORE_IQSCORE_H
#define IQSCORE_IQSCORE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(IQSCORE_BUILDING_LIBRARY)
#    define IQ_API __declspec(dllexport)
#  else
#    define IQ_API __declspec(dllimport)
#  endif
#else
#  define IQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iq_status {
  IQ_OK = 0,
  IQ_ERR_INVALID_ARGUMENT = 1,
  IQ_ERR_IO = 10,
  IQ_ERR_FORMAT = 11,
  IQ_ERR_NON_FINITE = 12,
  IQ_ERR_LABEL_COUNT = 13,
  IQ_ERR_SCHEMA = 14,
  IQ_ERR_ZERO_NORM_ROW = 20,
  IQ_ERR_NOT_NORMALIZED = 21,
  IQ_ERR_EMPTY_POOL = 22,
  IQ_ERR_LENGTH_MISMATCH = 23,
  IQ_ERR_EMPTY_VECTOR = 24,
  IQ_ERR_ALL_ZERO_SPECTRUM = 25,
  IQ_ERR_DEGENERATE_CAP = 26,
  IQ_ERR_CONVERGENCE = 27,
  IQ_ERR_ZERO_VARIANCE = 28,
  IQ_ERR_WEIGHT = 29,
  IQ_ERR_NO_ELIGIBLE_IDENTITY = 30,
  IQ_ERR_SINGLE_IDENTITY = 31,
  IQ_ERR_INTERNAL = 99
} iq_status;

typedef enum iq_format { IQ_FORMAT_BINARY = 0, IQ_FORMAT_CSV = 1 } iq_format;

typedef struct iq_dataset iq_dataset;
typedef struct iq_report iq_report;
typedef struct iq_series iq_series;

typedef struct iq_compute_config {
  size_t k;
  double alpha;
  double beta;
  int sample;                /* nonzero: identity-stratified sampling first */
  size_t target_identities;  /* M */
  size_t per_identity;       /* m */
  uint64_t seed;
  int dedup;                 /* nonzero: drop near-duplicates within identity */
  double dedup_threshold;
  size_t min_identity_size;
  int ceiling_normalized;    /* nonzero: min(k, n_y - 1) agreement denominator */
  size_t histogram_bins;
  double rankme_epsilon;
  int rankme_centered;
} iq_compute_config;

typedef struct iq_sampling_config {
  size_t target_identities;
  size_t per_identity;
  uint64_t seed;
  int dedup;
  double dedup_threshold;
  size_t min_identity_size;
} iq_sampling_config;

/* Defaults: k=10, alpha=0.2, beta=0.8, M=1000, m=10, dedup 0.9999, bins=20. */
IQ_API void iq_compute_config_init(iq_compute_config* cfg);
IQ_API void iq_sampling_config_init(iq_sampling_config* cfg);

IQ_API const char* iq_last_error(void);
IQ_API const char* iq_status_name(iq_status status);
/* 0 for IQ_OK, 2 for input/format errors, 3 for computation/validation errors. */
IQ_API int iq_status_exit_code(iq_status status);
IQ_API void iq_string_free(char* s);
IQ_API const char* iq_version(void);

/* Caps worker threads; 0 restores hardware concurrency. Never changes results. */
IQ_API void iq_set_threads(size_t threads);

/* ---- datasets ---------------------------------------------------------- */

IQ_API iq_status iq_dataset_read(const char* path, const char* label_path, iq_format format,
                                 iq_dataset** out);
IQ_API iq_status iq_dataset_write(const iq_dataset* ds, const char* path, const char* label_path,
                                  iq_format format);
IQ_API iq_status iq_dataset_from_arrays(size_t n, size_t d, const float* data,
                                        const int64_t* labels, iq_dataset** out);
IQ_API void iq_dataset_free(iq_dataset* ds);
IQ_API size_t iq_dataset_rows(const iq_dataset* ds);
IQ_API size_t iq_dataset_dim(const iq_dataset* ds);
IQ_API size_t iq_dataset_identities(const iq_dataset* ds);
IQ_API const float* iq_dataset_data(const iq_dataset* ds);
IQ_API const int64_t* iq_dataset_labels(const iq_dataset* ds);
IQ_API iq_status iq_dataset_hash(const iq_dataset* ds, char** hex_out);

/* Row-normalizes, then samples. manifest_json_out may be NULL. */
IQ_API iq_status iq_dataset_sample(const iq_dataset* ds, const iq_sampling_config* cfg,
                                   iq_dataset** out, char** manifest_json_out);
IQ_API iq_status iq_dataset_inject_noise(const iq_dataset* ds, double flip_ratio, uint64_t seed,
                                         iq_dataset** out, char** flip_log_json_out);

/* Synthetic clustered world; sigma is the expected perturbation norm. */
IQ_API iq_status iq_dataset_generate(size_t num_identities, size_t per_identity, size_t dim,
                                     double sigma, uint64_t seed, iq_dataset** out);

/* ---- IQ computation ---------------------------------------------------- */

IQ_API iq_status iq_compute(const iq_dataset* ds, const iq_compute_config* cfg, iq_report** out);
IQ_API void iq_report_free(iq_report* report);
IQ_API double iq_report_iq(const iq_report* report);
IQ_API double iq_report_consis(const iq_report* report);
IQ_API double iq_report_er_norm(const iq_report* report);
IQ_API double iq_report_rankme(const iq_report* report);
IQ_API size_t iq_report_k_used(const iq_report* report);
IQ_API size_t iq_report_rows_analyzed(const iq_report* report);
/* Primary report JSON (no timings). */
IQ_API iq_status iq_report_json(const iq_report* report, char** json_out);
IQ_API iq_status iq_report_timings_json(const iq_report* report, char** json_out);
/* Sampling manifest JSON, or "null" when compute ran without sampling. */
IQ_API iq_status iq_report_manifest_json(const iq_report* report, char** json_out);
/* Writes <prefix>agreement.csv, histogram.csv, spectrum.csv, log_spectrum.csv, cev.csv. */
IQ_API iq_status iq_report_write_sidecars(const iq_report* report, const char* prefix);

/* ---- fusion and validation -------------------------------------------- */

IQ_API iq_status iq_score(double mean_consis, double er_norm, double alpha, double beta,
                          double* out);
IQ_API iq_status iq_series_read_csv(const char* path, iq_series** out);
IQ_API iq_status iq_series_parse_csv(const char* text, iq_series** out);
IQ_API void iq_series_free(iq_series* series);
IQ_API size_t iq_series_size(const iq_series* series);
IQ_API iq_status iq_compare(const iq_series* series, double alpha, double beta, char** csv_out,
                            char** json_out);
/* grid may be NULL for the default 0.00..1.00 step 0.05 grid. */
IQ_API iq_status iq_sweep_beta(const iq_series* series, const double* grid, size_t grid_len,
                               char** csv_out);

/* ---- synthetic scenarios ---------------------------------------------- */

/* scenario_json: scenario file contents. reports_json_out and plane_csv_out
 * may be NULL. */
IQ_API iq_status iq_synth_run(const char* scenario_json, const iq_compute_config* cfg,
                              char** reports_json_out, char** plane_csv_out);

#ifdef __cplusplus
}
#endif

#endif /* IQSCORE_IQSCORE_H */
