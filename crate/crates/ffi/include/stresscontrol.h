#ifndef STRESSCONTROL_H
#define STRESSCONTROL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_NULL_POINTER = 1,
  SC_STATUS_INVALID_ARGUMENT = 2,
  SC_STATUS_GAMMA_INFEASIBLE = 3,
  SC_STATUS_NOT_STABILIZABLE = 4,
  SC_STATUS_NOT_DETECTABLE = 5,
  SC_STATUS_NON_FINITE_STATE = 6,
  SC_STATUS_NUMERICAL = 7,
  SC_STATUS_BUFFER_TOO_SMALL = 8,
  SC_STATUS_PANIC = 9,
} ScStatus;

/**
 * Opaque Riccati solution.
 */
typedef struct ScRiccati ScRiccati;

/**
 * Opaque linear system.
 */
typedef struct ScSystem ScSystem;

typedef struct ScRiccatiSummary {
  double gamma_used;
  double residual_norm;
  double closed_loop_abscissa;
  double saddle_abscissa;
  double p_frobenius;
  double gain_frobenius;
  size_t state_dim;
} ScRiccatiSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sc_version(void);

/**
 * Builds a Euclidean system `ds/dt = A s + B1 w + B2 u`, `y = C s`.
 * `a` is `n x n`, `b1` is `n x m1`, `b2` is `n x m2`, `c` is `p x n`.
 *
 * # Safety
 * Each array must hold the stated number of doubles; `out` must be writable.
 */
enum ScStatus sc_system_from_matrices(size_t n,
                                      size_t m1,
                                      size_t m2,
                                      size_t p,
                                      const double *a,
                                      const double *b1,
                                      const double *b2,
                                      const double *c,
                                      double gamma,
                                      struct ScSystem **out);

/**
 * Builds the discretized system described by a scenario TOML document.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum ScStatus sc_system_from_scenario_toml(const char *toml, struct ScSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from this library, not yet freed.
 */
void sc_system_free(struct ScSystem *sys);

/**
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_system_state_dim(const struct ScSystem *sys, size_t *out);

/**
 * Solves the H-infinity Riccati equation at the system's gamma.
 *
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_riccati_solve(const struct ScSystem *sys, struct ScRiccati **out);

/**
 * # Safety
 * `r` must be null or a handle from this library, not yet freed.
 */
void sc_riccati_free(struct ScRiccati *r);

/**
 * # Safety
 * `r` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_riccati_summary(const struct ScRiccati *r, struct ScRiccatiSummary *out);

/**
 * Copies `P` (row-major, `n * n` doubles) into `buf` of length `len`.
 *
 * # Safety
 * `r` must be a live handle; `buf` must hold `len` doubles.
 */
enum ScStatus sc_riccati_copy_p(const struct ScRiccati *r, double *buf, size_t len);

/**
 * Closed-loop H-infinity norm from `w` to `(C s, u)`.
 *
 * # Safety
 * Both handles must be live and belong together; `out` must be writable.
 */
enum ScStatus sc_hinf_norm(const struct ScSystem *sys, const struct ScRiccati *r, double *out);

/**
 * Smallest feasible gamma by bisection, starting from the bracket `[lo, hi]`.
 *
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_minimal_gamma(const struct ScSystem *sys, double lo, double hi, double *out);

/**
 * Runs the checks enabled in a scenario and returns the report as JSON.
 * `*pass` is 1 when every check passed. Free `*json` with [`sc_string_free`].
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `json` and `pass` must be writable.
 */
enum ScStatus sc_verify_scenario_toml(const char *toml, char **json, int *pass);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void sc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRESSCONTROL_H */
