#ifndef BANGBANG_H
#define BANGBANG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define BB_FILTER_HARD 0

#define BB_FILTER_L2 1

#define BB_FILTER_TANH 2

typedef enum BbStatus {
  BB_STATUS_OK = 0,
  /**
   * The solver ran but did not meet its tolerance.
   */
  BB_STATUS_NOT_CONVERGED = 1,
  BB_STATUS_INVALID_ARGUMENT = 2,
  BB_STATUS_NULL_POINTER = 3,
  /**
   * Integration or evaluation failed numerically.
   */
  BB_STATUS_NUMERICAL = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  BB_STATUS_INTERNAL = 5,
} BbStatus;

/**
 * Problem definition together with its integrator and solver settings.
 */
typedef struct BbProblem BbProblem;

/**
 * Summary of a solve written by [`bb_solve`] and [`bb_continue`].
 */
typedef struct BbSolveSummary {
  bool converged;
  double residual_norm;
  uint32_t iterations;
  uint32_t function_evaluations;
  /**
   * Objective of the converged trajectory; NaN otherwise.
   */
  double cost;
  /**
   * Filter constant of the returned solution.
   */
  double constant;
} BbSolveSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *bb_last_error(void);

/**
 * Normalized L²-norm filter `x / sqrt(delta + x²)`.
 *
 * # Safety
 * `out` must be null or point to a writable `double`.
 */
enum BbStatus bb_sat_l2(double x, double delta, double *out);

/**
 * Hyperbolic tangent filter `tanh(x / rho)`.
 *
 * # Safety
 * `out` must be null or point to a writable `double`.
 */
enum BbStatus bb_sat_tanh(double x, double rho, double *out);

/**
 * Smoothed bang-bang control of the switching function value `s`.
 *
 * # Safety
 * `out` must be null or point to a writable `double`.
 */
enum BbStatus bb_smooth_control(double s,
                                double u_min,
                                double u_max,
                                int32_t filter_kind,
                                double constant,
                                double *out);

/**
 * Minimal-time oscillator from (1, 1) to the origin with default settings.
 */
struct BbProblem *bb_problem_oscillator(void);

/**
 * GTO→GEO minimal-fuel transfer with the default spacecraft and orbits.
 */
struct BbProblem *bb_problem_gto_geo(void);

/**
 * Problem and settings from a TOML run configuration. Returns null on
 * error.
 *
 * # Safety
 * `toml` must be null or a NUL-terminated string.
 */
struct BbProblem *bb_problem_from_toml(const char *toml);

/**
 * # Safety
 * `problem` must be null or a handle from a `bb_problem_*` constructor that
 * has not been freed.
 */
void bb_problem_free(struct BbProblem *problem);

/**
 * Length of the shooting vector, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t bb_problem_shooting_dim(const struct BbProblem *problem);

/**
 * Shooting residual at `eta`; `out` receives `n` values.
 *
 * # Safety
 * `problem` must be a live handle; `eta` and `out` must hold `n` values.
 */
enum BbStatus bb_evaluate_residual(const struct BbProblem *problem,
                                   const double *eta,
                                   size_t n,
                                   int32_t filter_kind,
                                   double constant,
                                   double *out);

/**
 * Newton solve at a fixed filter constant. `solution` receives the final
 * iterate whether or not it converged.
 *
 * # Safety
 * `problem` must be a live handle; `eta0` and `solution` must hold `n`
 * values; `summary` must be null or writable.
 */
enum BbStatus bb_solve(const struct BbProblem *problem,
                       const double *eta0,
                       size_t n,
                       int32_t filter_kind,
                       double constant,
                       double *solution,
                       struct BbSolveSummary *summary);

/**
 * Decade continuation using the schedule of the handle's configuration,
 * or from 1 down to the filter's default floor when none was given.
 *
 * # Safety
 * As for [`bb_solve`].
 */
enum BbStatus bb_continue(const struct BbProblem *problem,
                          const double *eta0,
                          size_t n,
                          int32_t filter_kind,
                          uint64_t seed,
                          double *solution,
                          struct BbSolveSummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BANGBANG_H */
