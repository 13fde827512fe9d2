#ifndef QLAP_H
#define QLAP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QlapRegimeKind {
  QLAP_REGIME_KIND_SUBCRITICAL = 0,
  QLAP_REGIME_KIND_MASS_CRITICAL_LOWER = 1,
  QLAP_REGIME_KIND_INTERMEDIATE = 2,
  QLAP_REGIME_KIND_MASS_CRITICAL_UPPER = 3,
  QLAP_REGIME_KIND_SUPERCRITICAL = 4,
} QlapRegimeKind;

typedef enum QlapStatus {
  QLAP_STATUS_OK = 0,
  QLAP_STATUS_NULL_POINTER = 1,
  QLAP_STATUS_INVALID_PARAMS = 2,
  QLAP_STATUS_REGIME = 3,
  QLAP_STATUS_NO_SOLUTION = 4,
  QLAP_STATUS_NUMERICAL = 5,
  QLAP_STATUS_PANIC = 6,
} QlapStatus;

/**
 * Opaque shooting ground state.
 */
typedef struct QlapGroundState QlapGroundState;

/**
 * Opaque minimization result.
 */
typedef struct QlapMinResult QlapMinResult;

/**
 * `r_max <= 0` picks the radius automatically.
 */
typedef struct QlapMinimizeOptions {
  uint32_t max_iter;
  uint32_t restarts;
  uint64_t seed;
  double tol_grad;
  uint32_t grid_nodes;
  double r_max;
} QlapMinimizeOptions;

typedef struct QlapParams {
  uint32_t dim;
  double q;
  double p;
  double alpha;
  double mass;
} QlapParams;

typedef struct QlapRegime {
  enum QlapRegimeKind kind;
  bool zero_mass_eligible;
  double p2;
  double pq;
} QlapRegime;

typedef struct QlapThreshold {
  double d1;
  double dm;
  double alpha0_formula;
  /**
   * NaN when bisection was not requested.
   */
  double alpha0_bisect;
} QlapThreshold;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *qlap_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qlap_version(void);

struct QlapMinimizeOptions qlap_minimize_options_default(void);

/**
 * # Safety
 * `out` must be null or valid for writes.
 */
enum QlapStatus qlap_classify_regime(struct QlapParams params, struct QlapRegime *out);

/**
 * Global minimization on the mass sphere. `opts` may be null for defaults.
 *
 * # Safety
 * `opts` must be null or point to a valid struct; `out` must be valid for writes.
 */
enum QlapStatus qlap_minimize_global(struct QlapParams params,
                                     const struct QlapMinimizeOptions *opts,
                                     struct QlapMinResult **out);

/**
 * Local minimization over `K > rho/2`.
 *
 * # Safety
 * As [`qlap_minimize_global`].
 */
enum QlapStatus qlap_minimize_local(struct QlapParams params,
                                    double rho,
                                    const struct QlapMinimizeOptions *opts,
                                    struct QlapMinResult **out);

/**
 * # Safety
 * `res` must be null or a handle from this library not yet freed.
 */
void qlap_min_result_free(struct QlapMinResult *res);

/**
 * Energy; NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double qlap_min_result_energy(const struct QlapMinResult *res);

/**
 * Lagrange multiplier; NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double qlap_min_result_lambda(const struct QlapMinResult *res);

/**
 * # Safety
 * `res` must be null or a live handle.
 */
bool qlap_min_result_converged(const struct QlapMinResult *res);

/**
 * True when no negative energy was reached (the infimum is zero).
 *
 * # Safety
 * `res` must be null or a live handle.
 */
bool qlap_min_result_vanishing(const struct QlapMinResult *res);

/**
 * Number of grid nodes of the minimizer; 0 for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
size_t qlap_min_result_len(const struct QlapMinResult *res);

/**
 * Copies up to `len` nodes and values into `r` and `u`; returns the count.
 *
 * # Safety
 * `r` and `u` must each be valid for `len` writes.
 */
size_t qlap_min_result_profile(const struct QlapMinResult *res, double *r, double *u, size_t len);

/**
 * Threshold strength from `d(1)` and, if `bisect`, by bisection on the sign
 * of the minimum energy. `params.alpha` is ignored.
 *
 * # Safety
 * `opts` must be null or valid; `out` must be valid for writes.
 */
enum QlapStatus qlap_alpha0(struct QlapParams params,
                            const struct QlapMinimizeOptions *opts,
                            bool bisect,
                            struct QlapThreshold *out);

/**
 * Positive decaying radial solution at multiplier `lambda >= 0`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum QlapStatus qlap_find_ground_state(struct QlapParams params,
                                       double lambda,
                                       struct QlapGroundState **out);

/**
 * # Safety
 * `gs` must be null or a handle from this library not yet freed.
 */
void qlap_ground_state_free(struct QlapGroundState *gs);

/**
 * `u(0)`; NaN for a null handle.
 *
 * # Safety
 * `gs` must be null or a live handle.
 */
double qlap_ground_state_u0(const struct QlapGroundState *gs);

/**
 * Fitted tail slope of `ln|u|` against `ln r`; NaN when none was fitted.
 *
 * # Safety
 * `gs` must be null or a live handle.
 */
double qlap_ground_state_decay_slope(const struct QlapGroundState *gs);

/**
 * `‖u‖₂²`; +infinity when divergent, NaN for a null handle.
 *
 * # Safety
 * `gs` must be null or a live handle.
 */
double qlap_ground_state_l2_mass(const struct QlapGroundState *gs);

/**
 * Relative Pohozaev residual of the grid-mapped profile; NaN if unavailable.
 *
 * # Safety
 * `gs` must be null or a live handle.
 */
double qlap_ground_state_pohozaev_residual(const struct QlapGroundState *gs);

/**
 * `u(r)` including the analytic tail; NaN for a null handle.
 *
 * # Safety
 * `gs` must be null or a live handle.
 */
double qlap_ground_state_eval(const struct QlapGroundState *gs, double r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QLAP_H */
