#ifndef ADAFTRL_H
#define ADAFTRL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes of the C API.
typedef enum AdaftrlStatus {
  ADAFTRL_STATUS_OK = 0,
  // A required pointer argument was null.
  ADAFTRL_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8 or JSON.
  ADAFTRL_STATUS_INVALID_JSON = 2,
  // The configuration or a parameter was rejected.
  ADAFTRL_STATUS_INVALID_CONFIG = 3,
  // A vector had the wrong length.
  ADAFTRL_STATUS_DIMENSION_MISMATCH = 4,
  // Non-finite input or an undefined numeric operation.
  ADAFTRL_STATUS_NUMERIC = 5,
  // An argmin could not be computed or certified.
  ADAFTRL_STATUS_SOLVER = 6,
  // The combination of options is not supported.
  ADAFTRL_STATUS_UNSUPPORTED = 7,
  // A run finished but a certificate failed.
  ADAFTRL_STATUS_CERTIFICATE_FAILED = 8,
  // A run finished but a bound did not hold.
  ADAFTRL_STATUS_BOUND_VIOLATED = 9,
  ADAFTRL_STATUS_IO = 10,
  // A Rust panic was caught at the boundary.
  ADAFTRL_STATUS_PANIC = 11,
  ADAFTRL_STATUS_OTHER = 12,
} AdaftrlStatus;

// A configured online learner.
typedef struct AdaftrlLearner AdaftrlLearner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next API call on the same thread.
const char *adaftrl_last_error(void);

// Static name of a status code, e.g. `"invalid_config"`.
const char *adaftrl_status_name(enum AdaftrlStatus status);

// Library version as a static string.
const char *adaftrl_version(void);

// Create a learner from a learner config and a feasible set (both JSON).
// `horizon` is the number of rounds, or 0 when unknown.
//
// # Safety
// The strings must be nul-terminated; `out` must be writable.
enum AdaftrlStatus adaftrl_learner_new(const char *learner_json,
                                       const char *set_json,
                                       uint64_t horizon,
                                       struct AdaftrlLearner **out);

// Release a learner. Null is ignored.
//
// # Safety
// `learner` must come from [`adaftrl_learner_new`] and not be used afterwards.
void adaftrl_learner_free(struct AdaftrlLearner *learner);

// Dimension of the learner's points (0 for a null handle).
//
// # Safety
// `learner` must be null or a live handle.
size_t adaftrl_learner_dim(const struct AdaftrlLearner *learner);

// Rounds completed so far (0 for a null handle).
//
// # Safety
// `learner` must be null or a live handle.
uint64_t adaftrl_learner_round(const struct AdaftrlLearner *learner);

// Copy the current play `x_t` into `out[0..len]`; `len` must equal the dimension.
//
// # Safety
// `out` must point to `len` writable doubles.
enum AdaftrlStatus adaftrl_learner_x(const struct AdaftrlLearner *learner, double *out, size_t len);

// Feed the (sub)gradient `g_t` observed at the current play and advance one round.
//
// # Safety
// `g` must point to `len` readable doubles.
enum AdaftrlStatus adaftrl_learner_step(struct AdaftrlLearner *learner,
                                        const double *g,
                                        size_t len);

// Feed a whole loss (JSON, same schema as config losses) and advance one
// round; the gradient is taken at the current play. Required by the implicit presets.
//
// # Safety
// `loss_json` must be nul-terminated.
enum AdaftrlStatus adaftrl_learner_step_loss(struct AdaftrlLearner *learner, const char *loss_json);

// Run every seed of an experiment config (JSON) and return the aggregated
// report as JSON in `*report_json`. `jobs` is the worker count (0 = all cores).
// The report is returned even when a bound or certificate fails; the status
// then says which.
//
// # Safety
// `config_json` must be nul-terminated; `report_json` must be writable.
enum AdaftrlStatus adaftrl_run_config(const char *config_json, size_t jobs, char **report_json);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void adaftrl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADAFTRL_H */
