#ifndef ECHO_LAB_H
#define ECHO_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kick ordering inside one Floquet period.
 */
typedef enum EchoKickOrder {
  ECHO_KICK_ORDER_DRIFT_THEN_KICK = 0,
  ECHO_KICK_ORDER_KICK_THEN_DRIFT = 1,
} EchoKickOrder;

/**
 * Result code of every fallible call.
 */
typedef enum EchoStatus {
  ECHO_STATUS_OK = 0,
  ECHO_STATUS_NULL_POINTER = 1,
  ECHO_STATUS_INVALID_ARGUMENT = 2,
  ECHO_STATUS_NOT_NORMALIZED = 3,
  ECHO_STATUS_NORM_DRIFT = 4,
  ECHO_STATUS_NON_CONVERGENCE = 5,
  ECHO_STATUS_FIT_FAILED = 6,
  ECHO_STATUS_OUT_OF_RANGE = 7,
  ECHO_STATUS_BUFFER_TOO_SMALL = 8,
  ECHO_STATUS_INTERNAL = 9,
} EchoStatus;

/**
 * Opaque result of [`echo_kr_run`].
 */
typedef struct EchoKrRun EchoKrRun;

/**
 * Parameters of a kicked-rotor echo run over a random packet mixture.
 */
typedef struct EchoKrConfig {
  /**
   * Hilbert-space dimension; ħ = 2π/n.
   */
  size_t n;
  double kick_strength;
  /**
   * Perturbation in units of ħ.
   */
  double eps_over_hbar;
  size_t packets;
  size_t steps;
  uint64_t seed;
  /**
   * Mixture region in units of 2π.
   */
  double theta_min;
  double theta_max;
  double p_min;
  double p_max;
  enum EchoKickOrder kick_order;
} EchoKrConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *echo_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t echo_last_error_message(char *buf, size_t len);

/**
 * Defaults of the standard experiment: N = 8192, K = 10, ε/ħ = 1.1,
 * 100 packets, 40 steps.
 */
struct EchoKrConfig echo_kr_config_default(void);

/**
 * Propagates every packet of the mixture under both branches and stores the
 * echo amplitudes. On success `*out` owns a new run.
 *
 * # Safety
 * `config` must point to a valid config and `out` to writable storage.
 */
enum EchoStatus echo_kr_run(const struct EchoKrConfig *config, struct EchoKrRun **out);

/**
 * Releases a run. Null is ignored.
 *
 * # Safety
 * `run` must be null or a pointer obtained from [`echo_kr_run`] that has not
 * been freed.
 */
void echo_kr_run_free(struct EchoKrRun *run);

/**
 * Number of recorded times (steps + 1); zero for a null run.
 *
 * # Safety
 * `run` must be null or a live run.
 */
size_t echo_kr_len(const struct EchoKrRun *run);

/**
 * Number of packets in the mixture; zero for a null run.
 *
 * # Safety
 * `run` must be null or a live run.
 */
size_t echo_kr_packets(const struct EchoKrRun *run);

/**
 * Copies the allegiance curve into `out` (at least [`echo_kr_len`] values).
 *
 * # Safety
 * `run` must be a live run and `out` must hold `len` doubles.
 */
enum EchoStatus echo_kr_allegiance(const struct EchoKrRun *run, double *out, size_t len);

/**
 * Copies the averaged fidelity curve into `out`.
 *
 * # Safety
 * `run` must be a live run and `out` must hold `len` doubles.
 */
enum EchoStatus echo_kr_avg_fidelity(const struct EchoKrRun *run, double *out, size_t len);

/**
 * Echo amplitude of one packet at one recorded time.
 *
 * # Safety
 * `run` must be a live run; `re` and `im` must be writable.
 */
enum EchoStatus echo_kr_amplitude(const struct EchoKrRun *run,
                                  size_t packet,
                                  size_t time_index,
                                  double *re,
                                  double *im);

/**
 * Standard-map Lyapunov exponent averaged over ten seeded starting points.
 *
 * # Safety
 * `out` must be writable.
 */
enum EchoStatus echo_lyapunov(double k,
                              size_t n_transient,
                              size_t n_iter,
                              uint64_t seed,
                              double *out);

/**
 * Least-squares exponential rate of `values` against `times` on
 * `[t1, t2]`. Pass NaN as `saturation` to disable plateau truncation.
 *
 * # Safety
 * `times` and `values` must hold `len` doubles; `rate` must be writable and
 * `stderr` may be null.
 */
enum EchoStatus echo_fit_exp_rate(const double *times,
                                  const double *values,
                                  size_t len,
                                  double t1,
                                  double t2,
                                  double saturation,
                                  double *rate,
                                  double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECHO_LAB_H */
