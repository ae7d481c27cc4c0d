#ifndef EBITGATE_H
#define EBITGATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EbgStatus {
  EBG_STATUS_OK = 0,
  EBG_STATUS_NULL_POINTER = 1,
  EBG_STATUS_OUT_OF_DOMAIN = 2,
  EBG_STATUS_INVALID_POVM = 3,
  EBG_STATUS_NO_SIGN_CHANGE = 4,
  EBG_STATUS_INVALID_ARGUMENT = 5,
  EBG_STATUS_INTERNAL = 6,
  EBG_STATUS_PANIC = 7,
} EbgStatus;

/**
 * Which closed form gives the optimum.
 */
typedef enum EbgCase {
  EBG_CASE_I = 1,
  EBG_CASE_II = 2,
  EBG_CASE_BOUNDARY = 3,
} EbgCase;

/**
 * Validated `(theta, alpha)` pair.
 */
typedef struct EbgParams EbgParams;

/**
 * Protocol with fixed measurement weights.
 */
typedef struct EbgProtocol EbgProtocol;

typedef struct EbgOptimum {
  /**
   * An [`EbgCase`] value.
   */
  int32_t case_label;
  double x;
  double y;
  double p_max;
  double delta;
} EbgOptimum;

typedef struct EbgOracle {
  double x;
  double y;
  double p;
} EbgOracle;

typedef struct EbgCostReport {
  double theta;
  double alpha;
  double e_alpha;
  double p_max;
  double avg_cost;
} EbgCostReport;

typedef struct EbgSummary {
  uint64_t trials;
  uint64_t seed;
  uint64_t success_count;
  uint64_t branch_counts[3];
  double empirical_p;
  double analytic_p;
  double sigma;
  double z_score;
  /**
   * NaN when no run qualified.
   */
  double mean_fidelity;
  /**
   * NaN outside deterministic mode.
   */
  double mean_ebits;
  double mean_bell_pairs;
} EbgSummary;

typedef struct EbgRunResult {
  /**
   * POVM outcome, 1 to 3.
   */
  uint8_t branch;
  /**
   * 1 when `theta_f` and `b_outcome` are set.
   */
  uint8_t has_residual;
  uint8_t b_outcome;
  double theta_f;
  uint32_t bell_pairs_consumed;
  /**
   * Against the ideal `U(theta)` applied to the input.
   */
  double fidelity;
  /**
   * Final `(A, B)` amplitudes as interleaved `re, im`, index `AB`.
   */
  double final_state[8];
} EbgRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next call into this library from the same thread.
 */
const char *ebg_last_error(void);

/**
 * Static, nul-terminated name of a status code.
 */
const char *ebg_status_name(enum EbgStatus status);

const char *ebg_version(void);

/**
 * # Safety
 * `out` must be valid for writes. The handle is released with
 * [`ebg_params_free`].
 */
enum EbgStatus ebg_params_new(double theta, double alpha, struct EbgParams **out);

/**
 * # Safety
 * `params` must come from [`ebg_params_new`] and not be used afterwards.
 * NULL is ignored.
 */
void ebg_params_free(struct EbgParams *params);

/**
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum EbgStatus ebg_optimum(const struct EbgParams *params, struct EbgOptimum *out);

/**
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum EbgStatus ebg_pmax_oracle(const struct EbgParams *params,
                               double resolution,
                               struct EbgOracle *out);

/**
 * Closed-form trace and determinant of the failure element for weights
 * `(x, y)`, plus its smallest eigenvalue from the constructed matrix.
 *
 * # Safety
 * `params` must be a live handle; each out-pointer must be valid for
 * writes or NULL to skip it.
 */
enum EbgStatus ebg_failure_element(const struct EbgParams *params,
                                   double x,
                                   double y,
                                   double *trace_out,
                                   double *det_out,
                                   double *min_eigenvalue_out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum EbgStatus ebg_e_alpha(double alpha, double *out);

/**
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum EbgStatus ebg_avg_cost(const struct EbgParams *params, struct EbgCostReport *out);

/**
 * # Safety
 * `alpha_out` and `cost_out` must be valid for writes.
 */
enum EbgStatus ebg_min_cost_over_alpha(double theta,
                                       double tol,
                                       double *alpha_out,
                                       double *cost_out);

/**
 * Threshold angle in radians; `tol` is in units of pi.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum EbgStatus ebg_threshold_theta(double tol, double *out);

/**
 * `input` is `-1` for a fresh random state per trial, or a basis index
 * `0..=3` for `|AB>`.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum EbgStatus ebg_monte_carlo(const struct EbgParams *params,
                               uint64_t trials,
                               uint64_t seed,
                               bool deterministic,
                               int32_t input,
                               struct EbgSummary *out);

/**
 * Protocol with weights `(x, y)`; fails with `InvalidPovm` when the
 * failure element would not be positive.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes. The handle is
 * released with [`ebg_protocol_free`].
 */
enum EbgStatus ebg_protocol_new(const struct EbgParams *params,
                                double x,
                                double y,
                                struct EbgProtocol **out);

/**
 * Protocol at the optimal weights.
 *
 * # Safety
 * As for [`ebg_protocol_new`].
 */
enum EbgStatus ebg_protocol_optimal(const struct EbgParams *params, struct EbgProtocol **out);

/**
 * # Safety
 * `protocol` must come from [`ebg_protocol_new`] or
 * [`ebg_protocol_optimal`] and not be used afterwards. NULL is ignored.
 */
void ebg_protocol_free(struct EbgProtocol *protocol);

/**
 * One run. `input` holds 8 doubles (`re, im` per amplitude of `|AB>`,
 * normalized internally) or is NULL for a random state drawn from the run's
 * random stream. Runs are reproducible from `(seed, trial)`.
 *
 * # Safety
 * `protocol` must be a live handle, `input` NULL or readable for 8
 * doubles, and `out` valid for writes.
 */
enum EbgStatus ebg_protocol_run(const struct EbgProtocol *protocol,
                                const double *input,
                                uint64_t seed,
                                uint64_t trial,
                                bool deterministic,
                                struct EbgRunResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EBITGATE_H */
