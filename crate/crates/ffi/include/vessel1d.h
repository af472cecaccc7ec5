#ifndef VESSEL1D_H
#define VESSEL1D_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum V1dStatus {
  V1D_STATUS_OK = 0,
  V1D_STATUS_NULL_POINTER = 1,
  V1D_STATUS_INVALID_ARGUMENT = 2,
  V1D_STATUS_CONFIG = 3,
  V1D_STATUS_SOLVER = 4,
  V1D_STATUS_POSTPROCESS = 5,
  V1D_STATUS_PANIC = 6,
} V1dStatus;

/**
 * Reference geometry handle.
 */
typedef struct V1dGeometry V1dGeometry;

/**
 * Solver handle; owns its geometry and state.
 */
typedef struct V1dSolver V1dSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap` bytes). Returns the buffer size needed for the full
 * message including the terminator; 1 when there is no error.
 *
 * # Safety
 * `buf` must be NULL or valid for `cap` bytes.
 */
size_t v1d_last_error_message(char *buf, size_t cap);

/**
 * Crate version as a static NUL-terminated string.
 */
const char *v1d_version(void);

/**
 * Benchmark stenosis of `severity` percent (23, 40 or 50).
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum V1dStatus v1d_geometry_stenosis(uint32_t severity,
                                     double r_max,
                                     double r_min,
                                     struct V1dGeometry **out);

/**
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum V1dStatus v1d_geometry_straight(double length, double radius, struct V1dGeometry **out);

/**
 * Reference radius and its first two derivatives at `z`.
 *
 * # Safety
 * `geometry` must come from a `v1d_geometry_*` constructor; the outputs
 * must be valid for one write each.
 */
enum V1dStatus v1d_geometry_radius(const struct V1dGeometry *geometry,
                                   double z,
                                   double *r0,
                                   double *dr0_dz,
                                   double *d2r0_dz2);

/**
 * # Safety
 * `geometry` must be NULL or come from a `v1d_geometry_*` constructor and
 * not have been freed.
 */
void v1d_geometry_free(struct V1dGeometry *geometry);

/**
 * Builds a solver from TOML run-configuration text (same keys as the CLI).
 *
 * # Safety
 * `config_toml` must be a NUL-terminated UTF-8 string; `out` must be valid
 * for one pointer write.
 */
enum V1dStatus v1d_solver_new(const char *config_toml, struct V1dSolver **out);

/**
 * Advances up to `max_steps` CFL-limited steps, never past `t_stop`.
 * `taken` receives the number of steps actually taken.
 *
 * # Safety
 * `solver` must come from [`v1d_solver_new`]; `taken` must be NULL or
 * valid for one write.
 */
enum V1dStatus v1d_solver_advance(struct V1dSolver *solver,
                                  double t_stop,
                                  size_t max_steps,
                                  size_t *taken);

/**
 * Current time, step count and steady residual.
 *
 * # Safety
 * `solver` must come from [`v1d_solver_new`]; each output must be NULL or
 * valid for one write.
 */
enum V1dStatus v1d_solver_status(const struct V1dSolver *solver,
                                 double *time,
                                 size_t *steps,
                                 double *residual);

/**
 * Samples the solution on `n >= 2` uniform points including both ends.
 * Any output array may be NULL; the others must hold `n` doubles.
 *
 * # Safety
 * `solver` must come from [`v1d_solver_new`]; non-NULL arrays must be valid
 * for `n` writes.
 */
enum V1dStatus v1d_solver_sample(const struct V1dSolver *solver,
                                 size_t n,
                                 double *z,
                                 double *a,
                                 double *q,
                                 double *u,
                                 double *p);

/**
 * # Safety
 * `solver` must be NULL or come from [`v1d_solver_new`] and not have been
 * freed.
 */
void v1d_solver_free(struct V1dSolver *solver);

/**
 * `(2 / (R^2 U^2)) * int_0^R r u_z^2 dr` for the gamma profile.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum V1dStatus v1d_coriolis_integral(double gamma, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VESSEL1D_H */
