#ifndef TENSOR_ALS_H
#define TENSOR_ALS_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TalsStatus {
  TALS_STATUS_OK = 0,
  TALS_STATUS_NULL_POINTER = 1,
  TALS_STATUS_INVALID_ARGUMENT = 2,
  TALS_STATUS_SHAPE_MISMATCH = 3,
  TALS_STATUS_NOT_SPD = 4,
  TALS_STATUS_ZERO_TARGET = 5,
  TALS_STATUS_PROJECTED_SINGULAR = 6,
  TALS_STATUS_SERIES_TOO_SHORT = 7,
  TALS_STATUS_SERIALIZATION = 8,
  TALS_STATUS_OUT_OF_RANGE = 9,
  TALS_STATUS_PANIC = 10,
} TalsStatus;

typedef enum TalsTermination {
  TALS_TERMINATION_MAX_SWEEPS = 0,
  TALS_TERMINATION_F_STALLED = 1,
  TALS_TERMINATION_GRAD_SMALL = 2,
  TALS_TERMINATION_ANGLE_SMALL = 3,
  TALS_TERMINATION_DEGENERATE = 4,
} TalsTermination;

typedef enum TalsRateClass {
  TALS_RATE_CLASS_SUPERLINEAR = 0,
  TALS_RATE_CLASS_LINEAR = 1,
  TALS_RATE_CLASS_SUBLINEAR = 2,
  TALS_RATE_CLASS_INCONCLUSIVE = 3,
} TalsRateClass;

/**
 * Opaque problem handle.
 */
typedef struct TalsProblem TalsProblem;

/**
 * Opaque run-trace handle.
 */
typedef struct TalsTrace TalsTrace;

/**
 * One micro-step. `tan_angle` is NaN when the problem has no reference.
 */
typedef struct TalsRecord {
  /**
   * Sweep index, from 1.
   */
  size_t sweep;
  /**
   * Block index, from 1.
   */
  size_t mu;
  double f;
  double decrement;
  double grad_norm;
  size_t w_rank;
  double resid_orth;
  double param_norm_max;
  double tan_angle;
  bool degenerate;
} TalsRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *tals_last_error(void);

/**
 * Builds a problem from a JSON run configuration (gallery label with its
 * arguments, or an inline problem).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum TalsStatus tals_problem_from_json(const char *json, struct TalsProblem **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum TalsStatus tals_problem_mohlenkamp(double tau, struct TalsProblem **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum TalsStatus tals_problem_blambda(double lambda,
                                     size_t n,
                                     uint64_t seed,
                                     struct TalsProblem **out);

/**
 * # Safety
 * `problem` must be NULL or a handle from this library not yet freed.
 */
void tals_problem_free(struct TalsProblem *problem);

/**
 * Number of parameter blocks, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t tals_problem_num_blocks(const struct TalsProblem *problem);

/**
 * Number of tensor entries, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t tals_problem_tensor_len(const struct TalsProblem *problem);

/**
 * Runs ALS. A negative `angle_tol` disables the angle criterion.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum TalsStatus tals_run(const struct TalsProblem *problem,
                         size_t max_sweeps,
                         double f_tol,
                         double grad_tol,
                         double angle_tol,
                         double eps_rank,
                         struct TalsTrace **out);

/**
 * # Safety
 * `trace` must be NULL or a handle from this library not yet freed.
 */
void tals_trace_free(struct TalsTrace *trace);

/**
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t tals_trace_num_records(const struct TalsTrace *trace);

/**
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t tals_trace_num_sweeps(const struct TalsTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum TalsStatus tals_trace_termination(const struct TalsTrace *trace, enum TalsTermination *out);

/**
 * Copies record `index` into `out`.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum TalsStatus tals_trace_record(const struct TalsTrace *trace,
                                  size_t index,
                                  struct TalsRecord *out);

/**
 * Writes up to `cap` per-sweep tangents (initial first) into `buf` and the
 * full series length into `len`. Pass `cap = 0` to query the length.
 *
 * # Safety
 * `trace` must be a live handle; `buf` must hold `cap` doubles; `len` writable.
 */
enum TalsStatus tals_trace_tangents(const struct TalsTrace *trace,
                                    double *buf,
                                    size_t cap,
                                    size_t *len);

/**
 * Windowed-median tangent ratio of the run and its classification.
 *
 * # Safety
 * `trace` must be a live handle; `q_hat` and `class` writable.
 */
enum TalsStatus tals_trace_rate(const struct TalsTrace *trace,
                                size_t window,
                                double *q_hat,
                                enum TalsRateClass *class_);

/**
 * The trace as CSV; free with [`tals_string_free`]. NULL on failure.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
char *tals_trace_csv(const struct TalsTrace *trace);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void tals_string_free(char *s);

/**
 * Micro-step rate `q_λ` of the `b_λ` family.
 */
double tals_q_lambda(double lambda);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tals_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TENSOR_ALS_H */
