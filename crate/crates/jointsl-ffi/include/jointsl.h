/* jointsl C ABI. Generated by cbindgen; do not edit by hand. */

#ifndef JOINTSL_H
#define JOINTSL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Success.
#define JSL_OK 0

// Invalid input (bad arguments, malformed files, null pointers).
#define JSL_ERR_INVALID 2

// Numerical failure (non-convergence, degenerate weights, panics).
#define JSL_ERR_NUMERICAL 3

// Opaque dataset handle.
typedef struct JslDataset JslDataset;

// Opaque fitted-model handle (posterior draws plus the model frame).
typedef struct JslFit JslFit;

// Opaque model-library handle.
typedef struct JslLibrary JslLibrary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *jsl_version(void);

// Message describing the most recent failure on this thread (empty after a
// success). The pointer stays valid until the next jointsl call on the
// same thread.
const char *jsl_last_error_message(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be a pointer previously returned by a jointsl function that
// documents `jsl_string_free` ownership, or null.
void jsl_string_free(char *s);

// Parses a dataset from CSV text (`id,time,value,obs_time,event,w...`).
//
// # Safety
// `text` must be a valid NUL-terminated string.
struct JslDataset *jsl_dataset_from_csv(const char *text);

// Reads a dataset from a CSV file.
//
// # Safety
// `path` must be a valid NUL-terminated string.
struct JslDataset *jsl_dataset_read_csv(const char *path);

// Serializes a dataset to CSV text. Free with `jsl_string_free`.
//
// # Safety
// `ds` must be a live dataset handle.
char *jsl_dataset_to_csv(const struct JslDataset *ds);

// Number of subjects, or -1 on error.
//
// # Safety
// `ds` must be a live dataset handle or null.
int64_t jsl_dataset_len(const struct JslDataset *ds);

// Number of observed events, or -1 on error.
//
// # Safety
// `ds` must be a live dataset handle or null.
int64_t jsl_dataset_n_events(const struct JslDataset *ds);

// Writes the censored fraction to `out`.
//
// # Safety
// `ds` must be a live dataset handle; `out` must point to a writable f64.
int32_t jsl_dataset_censoring_rate(const struct JslDataset *ds, double *out);

// Simulates a dataset under scenario "I", "II", or "III" with the standard
// generator (deterministic in the seed).
//
// # Safety
// `scenario` must be a valid NUL-terminated string.
struct JslDataset *jsl_simulate(const char *scenario,
                                uint64_t n,
                                double target_censoring,
                                uint64_t seed);

// Releases a dataset handle.
//
// # Safety
// `ds` must be a pointer returned by a dataset constructor, or null; it
// must not be used afterwards.
void jsl_dataset_free(struct JslDataset *ds);

// Parses a model library from JSON (an array of model specifications or a
// single specification object). Spline boundaries resolve against
// `follow_up`, the maximum follow-up time of the data the library will be
// fitted on.
//
// # Safety
// `text` must be a valid NUL-terminated string.
struct JslLibrary *jsl_library_from_json(const char *text, double follow_up);

// Number of models, or -1 on error.
//
// # Safety
// `lib` must be a live library handle or null.
int64_t jsl_library_len(const struct JslLibrary *lib);

// Releases a library handle.
//
// # Safety
// `lib` must be a pointer returned by a library constructor, or null; it
// must not be used afterwards.
void jsl_library_free(struct JslLibrary *lib);

// Fits one joint model (a single-entry library JSON) by MCMC.
//
// # Safety
// `ds` must be a live dataset handle; `model_json` a valid NUL-terminated
// string.
struct JslFit *jsl_fit(const struct JslDataset *ds,
                       const char *model_json,
                       uint64_t iterations,
                       uint64_t burn_in,
                       uint64_t thin,
                       uint64_t seed);

// Saves a fit to the versioned binary archive format.
//
// # Safety
// `fit` must be a live fit handle; `path` a valid NUL-terminated string.
int32_t jsl_fit_save(const struct JslFit *fit, const char *path);

// Loads a fit from a binary archive.
//
// # Safety
// `path` must be a valid NUL-terminated string.
struct JslFit *jsl_fit_load(const char *path);

// Number of stored posterior draws, or -1 on error.
//
// # Safety
// `fit` must be a live fit handle or null.
int64_t jsl_fit_n_draws(const struct JslFit *fit);

// Name of the fitted model. Free with `jsl_string_free`.
//
// # Safety
// `fit` must be a live fit handle.
char *jsl_fit_model_name(const struct JslFit *fit);

// Conditional risk π(u | t) for one subject: the probability of an event in
// (t, u] given survival to t and the subject's measurements up to t.
//
// # Safety
// `fit` and `ds` must be live handles; `subject_id` a valid NUL-terminated
// string; `out_risk` a writable f64 pointer.
int32_t jsl_conditional_risk(const struct JslFit *fit,
                             const struct JslDataset *ds,
                             const char *subject_id,
                             double t,
                             double u,
                             uint64_t mc_draws,
                             uint64_t seed,
                             double *out_risk);

// Releases a fit handle.
//
// # Safety
// `fit` must be a pointer returned by a fit constructor, or null; it must
// not be used afterwards.
void jsl_fit_free(struct JslFit *fit);

// Cross-validates the library and optimizes the interval weights; returns
// the panel bundle as JSON. Free with `jsl_string_free`.
//
// `metric` is "ibs", "epce", or "both"; `censoring_weights` is "ipcw",
// "model", or "both"; `diff` is "forward" or "central".
//
// # Safety
// `ds` and `lib` must be live handles; `landmarks` must point to
// `n_landmarks` doubles; the string arguments must be valid NUL-terminated
// strings.
char *jsl_superlearn(const struct JslDataset *ds,
                     const struct JslLibrary *lib,
                     uint64_t folds,
                     const double *landmarks,
                     size_t n_landmarks,
                     double dt,
                     const char *metric,
                     const char *censoring_weights,
                     double epsilon,
                     const char *diff,
                     uint64_t mc_draws,
                     uint64_t iterations,
                     uint64_t burn_in,
                     uint64_t thin,
                     uint64_t seed);

// Refits the library on `train` and scores the panel's frozen weights on
// `test`; returns the evaluation bundle as JSON. `panel_json` is the output
// of `jsl_superlearn` (or the CLI's panel file). Free the result with
// `jsl_string_free`.
//
// # Safety
// `train`, `test`, and `lib` must be live handles; `panel_json` a valid
// NUL-terminated string.
char *jsl_evaluate(const struct JslDataset *train,
                   const struct JslDataset *test,
                   const struct JslLibrary *lib,
                   const char *panel_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JOINTSL_H */
