#ifndef DRIFTID_H
#define DRIFTID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DriftidStatus {
  DRIFTID_STATUS_OK = 0,
  DRIFTID_STATUS_NULL_POINTER = 1,
  /**
   * Bad arguments or configuration.
   */
  DRIFTID_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The computation itself broke down.
   */
  DRIFTID_STATUS_NUMERICAL = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  DRIFTID_STATUS_PANIC = 4,
} DriftidStatus;

/**
 * Fourier potential `Φ` on a period of length `L`.
 */
typedef struct DriftidPotential DriftidPotential;

/**
 * Simulated particle paths with their schedule and domain.
 */
typedef struct DriftidTrajectories DriftidTrajectories;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library on the thread.
 */
const char *driftid_last_error(void);

/**
 * Creates `Φ(x) = Σ a_k cos(2πkx/L) + b_k sin(2πkx/L)` from `num_modes`
 * cosine and sine coefficients.
 *
 * # Safety
 * `cos` and `sin` must point to `num_modes` readable values; `out` must be writable.
 */
enum DriftidStatus driftid_potential_new(const double *cos,
                                         const double *sin,
                                         size_t num_modes,
                                         double length,
                                         struct DriftidPotential **out);

/**
 * The default two-well potential padded to `num_modes` modes.
 *
 * # Safety
 * `out` must be writable.
 */
enum DriftidStatus driftid_potential_two_well(size_t num_modes,
                                              double length,
                                              struct DriftidPotential **out);

/**
 * Number of Fourier modes `K`, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t driftid_potential_num_modes(const struct DriftidPotential *p);

/**
 * Copies the coefficients into `cos_out` and `sin_out`, each of length `capacity >= K`.
 *
 * # Safety
 * `p` must be a live handle and both buffers must hold `capacity` values.
 */
enum DriftidStatus driftid_potential_coefficients(const struct DriftidPotential *p,
                                                  double *cos_out,
                                                  double *sin_out,
                                                  size_t capacity);

/**
 * Writes `Φ(x)` to `out`.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum DriftidStatus driftid_potential_eval(const struct DriftidPotential *p, double x, double *out);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void driftid_potential_free(struct DriftidPotential *p);

/**
 * Simulates `n` particles of `dX = (u + Φ'(X)) dt + σ dW` on `[a, b]`,
 * observed at `steps + 1` equally spaced times in `[0, final_time]`, started
 * uniformly. `periodic` selects wrapping, otherwise reflection.
 *
 * # Safety
 * `potential` must be a live handle and `out` writable.
 */
enum DriftidStatus driftid_simulate(const struct DriftidPotential *potential,
                                    double constant_flux,
                                    double sigma,
                                    double final_time,
                                    size_t steps,
                                    double a,
                                    double b,
                                    bool periodic,
                                    size_t n,
                                    uint64_t seed,
                                    struct DriftidTrajectories **out);

/**
 * Number of particles, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t driftid_trajectories_particles(const struct DriftidTrajectories *t);

/**
 * Number of observation intervals `M`, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t driftid_trajectories_steps(const struct DriftidTrajectories *t);

/**
 * Copies the positions, particle-major (`particles × (steps + 1)`), into `buf`.
 *
 * # Safety
 * `t` must be a live handle and `buf` must hold `len` values.
 */
enum DriftidStatus driftid_trajectories_copy_positions(const struct DriftidTrajectories *t,
                                                       double *buf,
                                                       size_t len);

/**
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void driftid_trajectories_free(struct DriftidTrajectories *t);

/**
 * MAP estimate of a `num_modes`-mode potential from the paths, with known
 * flux `constant_flux` and penalty `alpha ‖Φ‖²_{H^order}` (`alpha = 0`
 * disables it). `converged` may be null.
 *
 * # Safety
 * `t` must be a live handle, `out` writable and `converged` null or writable.
 */
enum DriftidStatus driftid_infer(const struct DriftidTrajectories *t,
                                 double constant_flux,
                                 size_t num_modes,
                                 double alpha,
                                 double order,
                                 struct DriftidPotential **out,
                                 bool *converged);

/**
 * `‖Φ_a − Φ_b‖_{L²}` over one period.
 *
 * # Safety
 * `a`, `b` must be live handles and `out` writable.
 */
enum DriftidStatus driftid_l2_error(const struct DriftidPotential *a,
                                    const struct DriftidPotential *b,
                                    double *out);

/**
 * Least-squares line through `(ln n_i, ln error_i)` with its residual RMS;
 * needs `len >= 3` and positive values.
 *
 * # Safety
 * `n` and `error` must hold `len` values; the outputs must be writable.
 */
enum DriftidStatus driftid_fit_rate(const double *n,
                                    const double *error,
                                    size_t len,
                                    double *slope,
                                    double *intercept,
                                    double *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRIFTID_H */
