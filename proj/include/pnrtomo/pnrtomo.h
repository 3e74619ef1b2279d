/* pnrtomo C API.
 *
 * All functions return a pnr_status; on failure a description is available
 * from pnr_last_error() until the next call on the same thread. Handles are
 * opaque and owned by the caller, who releases them with the matching
 * *_free function (passing NULL is allowed).
 */
#ifndef PNRTOMO_H
#define PNRTOMO_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(PNR_BUILDING_LIBRARY)
#define PNR_API __declspec(dllexport)
#else
#define PNR_API __declspec(dllimport)
#endif
#else
#define PNR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pnr_status {
  PNR_OK = 0,
  PNR_ERR_INVALID_ARGUMENT = 1,
  PNR_ERR_SCHEMA = 2,
  PNR_ERR_NUMERICAL = 3,
  PNR_ERR_LINEAGE = 4,
  PNR_ERR_IO = 5,
  PNR_ERR_DOMAIN = 6,
  PNR_ERR_SHAPE = 7,
  PNR_ERR_CALIBRATION = 8,
  PNR_ERR_ESTIMATION = 9,
  PNR_ERR_CONFIG = 10,
  PNR_ERR_INTERNAL = 99
} pnr_status;

typedef enum pnr_binning { PNR_BINNING_THRESHOLD = 0, PNR_BINNING_AREA = 1 } pnr_binning;

PNR_API const char* pnr_version(void);
PNR_API const char* pnr_last_error(void);
PNR_API const char* pnr_status_name(pnr_status status);

/* ---- configuration ---------------------------------------------------- */

typedef struct pnr_config pnr_config;

PNR_API pnr_status pnr_config_default(pnr_config** out);
PNR_API pnr_status pnr_config_parse(const char* json_text, pnr_config** out);
PNR_API pnr_status pnr_config_load(const char* path, pnr_config** out);
PNR_API pnr_status pnr_config_save(const pnr_config* cfg, const char* path);
PNR_API void pnr_config_free(pnr_config* cfg);

/* Lineage hash, 16 hex digits plus NUL; `len` must be at least 17. The hash
 * is fixed when the config is created and changes only with the seed;
 * stage-local overrides below leave it alone. */
PNR_API pnr_status pnr_config_hash(const pnr_config* cfg, char* buf, size_t len);

PNR_API pnr_status pnr_config_set_seed(pnr_config* cfg, uint64_t seed);
PNR_API pnr_status pnr_config_set_reg_weight(pnr_config* cfg, double reg_weight);
PNR_API pnr_status pnr_config_set_truncation(pnr_config* cfg, int truncation);
PNR_API pnr_status pnr_config_set_outcomes(pnr_config* cfg, int outcomes);
PNR_API pnr_status pnr_config_set_method(pnr_config* cfg, pnr_binning method);
PNR_API pnr_status pnr_config_set_dark_counts(pnr_config* cfg, int enabled);

PNR_API pnr_status pnr_config_get_seed(const pnr_config* cfg, uint64_t* seed);
PNR_API pnr_status pnr_config_get_reg_weight(const pnr_config* cfg, double* reg_weight);
PNR_API pnr_status pnr_config_get_dims(const pnr_config* cfg, int* outcomes, int* truncation);

/* ---- file-level pipeline stages --------------------------------------- */

typedef struct pnr_run_options {
  int jobs;        /* worker threads, >= 1 */
  int force;       /* accept inputs produced by another config or seed */
  int skip_failed; /* drop probes whose calibration fails */
} pnr_run_options;

PNR_API void pnr_run_options_init(pnr_run_options* opts);

/* Trace CSVs, ensemble.json, config.json and manifest.json into out_dir. */
PNR_API pnr_status pnr_run_simulate(const pnr_config* cfg, const char* out_dir, const pnr_run_options* opts);
/* counts.json and fits.json; `n_failed` (may be NULL) receives the number of skipped probes. */
PNR_API pnr_status pnr_run_calibrate(const pnr_config* cfg, const char* trace_dir, const char* out_dir,
                                     const pnr_run_options* opts, size_t* n_failed);
/* povm.json and convergence.csv. */
PNR_API pnr_status pnr_run_reconstruct(const pnr_config* cfg, const char* counts_path, const char* ensemble_path,
                                       const char* out_dir, const pnr_run_options* opts);
/* estimate.json. */
PNR_API pnr_status pnr_run_estimate(const pnr_config* cfg, const char* counts_path, const char* ensemble_path,
                                    const char* out_dir, const pnr_run_options* opts);
/* fidelity.json, fidelity.csv, comparison.json, sweep.json. `min_fidelity`
 * (may be NULL) receives the smallest F_m up to the configured split. */
PNR_API pnr_status pnr_run_validate(const pnr_config* cfg, const char* povm_path, const char* counts_path,
                                    const char* ensemble_path, const char* estimate_path, const char* out_dir,
                                    const pnr_run_options* opts, double* min_fidelity);

/* ---- in-memory objects ------------------------------------------------ */

typedef struct pnr_ensemble pnr_ensemble;
typedef struct pnr_trace pnr_trace;
typedef struct pnr_counts pnr_counts;
typedef struct pnr_povm pnr_povm;

PNR_API pnr_status pnr_ensemble_paper_default(uint64_t n_pulses, pnr_ensemble** out);
PNR_API pnr_status pnr_ensemble_create(const int64_t* ids, const double* means, size_t k, uint64_t n_pulses,
                                       pnr_ensemble** out);
PNR_API pnr_status pnr_ensemble_load(const char* path, pnr_ensemble** out);
PNR_API pnr_status pnr_ensemble_size(const pnr_ensemble* e, size_t* k);
PNR_API pnr_status pnr_ensemble_probe(const pnr_ensemble* e, size_t j, int64_t* id, double* mean_photons);
PNR_API void pnr_ensemble_free(pnr_ensemble* e);

typedef struct pnr_detector_params {
  double eta;
  double gamma;
  double baseline_mv;
  double peak_spacing_mv;
  double sigma0_mv;
  double sigma_slope;
  uint32_t saturation_count; /* 0 = none */
} pnr_detector_params;

PNR_API void pnr_detector_params_init(pnr_detector_params* p);
PNR_API pnr_status pnr_simulate_trace(const pnr_detector_params* p, double mu, uint64_t n_pulses, uint64_t seed,
                                      pnr_trace** out);
PNR_API pnr_status pnr_trace_size(const pnr_trace* t, size_t* n);
/* Borrowed pointers valid until the trace is freed; `truth` is NULL when absent. */
PNR_API pnr_status pnr_trace_data(const pnr_trace* t, const double** amplitudes, const int** truth);
PNR_API void pnr_trace_free(pnr_trace* t);

/* Threshold or area binning of one trace into `outcomes` classes. */
PNR_API pnr_status pnr_calibrate_trace(const pnr_trace* t, int outcomes, pnr_binning method, uint64_t* counts);

PNR_API pnr_status pnr_counts_load(const char* path, pnr_counts** out);
PNR_API pnr_status pnr_counts_dims(const pnr_counts* c, int* outcomes, size_t* probes);
PNR_API pnr_status pnr_counts_get(const pnr_counts* c, int n, size_t j, uint64_t* value);
PNR_API void pnr_counts_free(pnr_counts* c);

PNR_API pnr_status pnr_povm_load(const char* path, pnr_povm** out);
PNR_API pnr_status pnr_povm_binomial(double eta, int outcomes, int truncation, pnr_povm** out);
PNR_API pnr_status pnr_povm_dark_counts(double eta, double gamma, int outcomes, int truncation, pnr_povm** out);
/* `probs` is row-major outcomes x k. */
PNR_API pnr_status pnr_povm_reconstruct(const double* probs, const double* means, size_t k, int outcomes,
                                        int truncation, double reg_weight, pnr_povm** out);
PNR_API pnr_status pnr_povm_dims(const pnr_povm* p, int* outcomes, int* truncation);
PNR_API pnr_status pnr_povm_entry(const pnr_povm* p, int n, int m, double* value);
PNR_API pnr_status pnr_povm_fidelity(const pnr_povm* a, const pnr_povm* b, int m, double* value);
PNR_API void pnr_povm_free(pnr_povm* p);

typedef struct pnr_estimate_result {
  double eta_hat;
  double eta_se;      /* NaN when unavailable */
  double gamma_hat;   /* NaN unless dark counts were estimated */
  double gamma_se;    /* NaN when unavailable */
  double gamma_upper; /* NaN unless dark counts were estimated */
  double loglik;
} pnr_estimate_result;

PNR_API pnr_status pnr_estimate(const pnr_counts* counts, const pnr_ensemble* ensemble, int dark_counts,
                                pnr_estimate_result* out);

#ifdef __cplusplus
}
#endif

#endif /* PNRTOMO_H */
