#ifndef MCD_H
#define MCD_H

/* C interface to the mcd multi-channel denoising toolkit.
 *
 * Every function returns an mcd_status. On failure a message is available
 * from mcd_last_error() on the calling thread until the next call on that
 * thread. Objects are opaque handles released with their *_free function.
 *
 * Functions that return text take (buf, cap, needed): at most cap bytes
 * including the terminator are written, *needed receives the full length
 * plus one. Passing buf = NULL, cap = 0 queries the size. A short buffer
 * yields MCD_ERR_BUFFER_TOO_SMALL with *needed set. */

#include <stddef.h>
#include <stdint.h>

#if defined(MCD_BUILDING_LIBRARY)
#define MCD_API __attribute__((visibility("default")))
#else
#define MCD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mcd_status {
  MCD_OK = 0,
  MCD_ERR_INVALID_ARGUMENT = 1,
  MCD_ERR_CONFIG = 2,
  MCD_ERR_MISSING_DEPENDENCY = 3,
  MCD_ERR_IO = 4,
  MCD_ERR_DATA = 5,
  MCD_ERR_INVARIANT = 6,
  MCD_ERR_TRAINING = 7,
  MCD_ERR_BUFFER_TOO_SMALL = 8,
  MCD_ERR_INTERNAL = 9
} mcd_status;

MCD_API const char* mcd_version(void);
MCD_API const char* mcd_status_string(mcd_status status);
MCD_API const char* mcd_last_error(void);
/* Stage named by the most recent MCD_ERR_MISSING_DEPENDENCY, else "". */
MCD_API const char* mcd_last_missing_stage(void);

/* ---- experiments ------------------------------------------------------- */

typedef struct mcd_experiment mcd_experiment;

/* Loads a JSON config and applies "dotted.key=value" overrides (a leading
 * "--" is accepted). The config file is never written. */
MCD_API mcd_status mcd_experiment_open(const char* config_path, const char* workdir, const char* const* overrides,
                                       size_t n_overrides, mcd_experiment** out);
MCD_API void mcd_experiment_free(mcd_experiment* exp);

/* Runs one stage by name, or "all" for the whole pipeline in order. */
MCD_API mcd_status mcd_experiment_run(mcd_experiment* exp, const char* stage);

MCD_API mcd_status mcd_experiment_config_hash(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed);
/* Space-separated stage names in execution order. */
MCD_API mcd_status mcd_experiment_pipeline(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed);
/* Effective configuration as JSON text. */
MCD_API mcd_status mcd_experiment_effective_config(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed);
/* Contents of the results file ("key=value" lines). */
MCD_API mcd_status mcd_experiment_results(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed);
MCD_API mcd_status mcd_experiment_results_path(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed);

/* ---- array containers -------------------------------------------------- */

typedef struct mcd_array mcd_array;

MCD_API mcd_status mcd_array_read(const char* stem, mcd_array** out);
/* float32 container; axes must be known axis names (rank entries). */
MCD_API mcd_status mcd_array_create(const size_t* shape, size_t rank, const char* const* axes, const char* units,
                                    mcd_array** out);
MCD_API mcd_status mcd_array_write(const mcd_array* a, const char* stem);
MCD_API void mcd_array_free(mcd_array* a);
MCD_API size_t mcd_array_rank(const mcd_array* a);
MCD_API size_t mcd_array_size(const mcd_array* a);
MCD_API mcd_status mcd_array_shape(const mcd_array* a, size_t* shape, size_t cap);
MCD_API mcd_status mcd_array_get(const mcd_array* a, double* out, size_t n);
MCD_API mcd_status mcd_array_set(mcd_array* a, const double* in, size_t n);
MCD_API mcd_status mcd_array_content_hash(const mcd_array* a, char* buf, size_t cap, size_t* needed);

/* ---- models ------------------------------------------------------------ */

typedef struct mcd_model mcd_model;

MCD_API mcd_status mcd_model_load(const char* path, mcd_model** out);
MCD_API void mcd_model_free(mcd_model* m);
MCD_API int mcd_model_in_channels(const mcd_model* m);
/* inputs: in_channels planes of rows x cols, row-major; out: rows x cols. */
MCD_API mcd_status mcd_model_predict(const mcd_model* m, const double* inputs, size_t rows, size_t cols, double* out);

/* ---- metrics ----------------------------------------------------------- */

/* *defined = 0 (and *out = 0) when there are no positives. */
MCD_API mcd_status mcd_auprc(const double* scores, const uint8_t* positive, size_t n, double* out, int* defined);
MCD_API mcd_status mcd_psnr(const double* image, const double* reference, size_t rows, size_t cols, double data_range,
                            double* out);
MCD_API mcd_status mcd_ssim(const double* image, const double* reference, size_t rows, size_t cols, double data_range,
                            double* out);

#ifdef __cplusplus
}
#endif

#endif /* MCD_H */
