#ifndef QFLIP_H
#define QFLIP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum QflipStatus {
  QFLIP_STATUS_OK = 0,
  QFLIP_STATUS_INVALID_ARGUMENT = 1,
  QFLIP_STATUS_NUMERICAL = 2,
  QFLIP_STATUS_IO = 3,
  QFLIP_STATUS_NULL_POINTER = 4,
  QFLIP_STATUS_PANIC = 5,
} QflipStatus;

/**
 * Error channel targeted by an STA design.
 */
typedef enum QflipChannel {
  QFLIP_CHANNEL_DETUNING = 0,
  QFLIP_CHANNEL_RABI = 1,
} QflipChannel;

/**
 * Opaque trained policy.
 */
typedef struct QflipPolicy QflipPolicy;

/**
 * Opaque piecewise-constant detuning program.
 */
typedef struct QflipSequence QflipSequence;

/**
 * Environment shape used to roll out a policy.
 */
typedef struct QflipEnvParams {
  /**
   * Rabi frequency (rad/s).
   */
  double omega;
  /**
   * Program duration (s).
   */
  double total_time;
  /**
   * Detuning range half-width (rad/s).
   */
  double delta_max;
  size_t n_steps;
} QflipEnvParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qflip_version(void);

/**
 * Message for the last failed call on this thread, or NULL if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *qflip_last_error_message(void);

/**
 * Defaults of the hybrid-error environment at Rabi frequency `omega`.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one `QflipEnvParams`.
 */
enum QflipStatus qflip_env_params_default(double omega, struct QflipEnvParams *out);

/**
 * Builds a program from `n` detunings (rad/s) and durations (s).
 *
 * # Safety
 * `deltas` and `durations` must each point to `n` readable doubles; `out`
 * must point to writable storage for one handle.
 */
enum QflipStatus qflip_sequence_new(double omega,
                                    const double *deltas,
                                    const double *durations,
                                    size_t n,
                                    struct QflipSequence **out);

/**
 * Resonant π pulse at Rabi frequency `omega`.
 *
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum QflipStatus qflip_pi_pulse(double omega, struct QflipSequence **out);

/**
 * Solves the STA ansatz for `channel` and discretizes it into `n_steps`
 * steps. `a_out`, `duration_out` and `max_delta_out` may be NULL.
 *
 * # Safety
 * `out` must point to writable storage for one handle; the optional
 * outputs must be NULL or writable.
 */
enum QflipStatus qflip_sta_design(enum QflipChannel channel,
                                  double omega,
                                  size_t n_steps,
                                  struct QflipSequence **out,
                                  double *a_out,
                                  double *duration_out,
                                  double *max_delta_out);

/**
 * Number of steps in `seq`, or 0 for NULL.
 *
 * # Safety
 * `seq` must be NULL or a live handle.
 */
size_t qflip_sequence_len(const struct QflipSequence *seq);

/**
 * Detuning (rad/s) and duration (s) of step `index`.
 *
 * # Safety
 * `seq` must be a live handle; the outputs must be writable.
 */
enum QflipStatus qflip_sequence_step(const struct QflipSequence *seq,
                                     size_t index,
                                     double *delta_out,
                                     double *duration_out);

/**
 * # Safety
 * `seq` must be NULL or a handle not yet freed.
 */
void qflip_sequence_free(struct QflipSequence *seq);

/**
 * Probability of ending in `|1⟩` from `|0⟩` under relative Rabi error
 * `delta_omega`, detuning error `delta_delta` (units of Ω) and dephasing
 * time `t2` (s; zero or negative disables dephasing).
 *
 * # Safety
 * `seq` must be a live handle and `out` writable.
 */
enum QflipStatus qflip_flip_probability(const struct QflipSequence *seq,
                                        double delta_omega,
                                        double delta_delta,
                                        double t2,
                                        size_t substeps,
                                        double *out);

/**
 * Loads a policy checkpoint written by `qflip train`.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum QflipStatus qflip_policy_load(const char *path, struct QflipPolicy **out);

/**
 * Deterministic error-free rollout of `policy`, returned as a program.
 *
 * # Safety
 * `policy` and `params` must be valid; `out` writable.
 */
enum QflipStatus qflip_policy_rollout(const struct QflipPolicy *policy,
                                      const struct QflipEnvParams *params,
                                      struct QflipSequence **out);

/**
 * # Safety
 * `policy` must be NULL or a handle not yet freed.
 */
void qflip_policy_free(struct QflipPolicy *policy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFLIP_H */
