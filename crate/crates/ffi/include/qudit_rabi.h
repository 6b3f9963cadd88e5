#ifndef QUDIT_RABI_H
#define QUDIT_RABI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QrAlgebraKind {
  QR_ALGEBRA_KIND_OSCILLATOR = 0,
  QR_ALGEBRA_KIND_SU11 = 1,
  QR_ALGEBRA_KIND_SU2 = 2,
} QrAlgebraKind;

typedef enum QrControlWire {
  QR_CONTROL_WIRE_LOWER = 0,
  QR_CONTROL_WIRE_UPPER = 1,
} QrControlWire;

typedef enum QrReducedMode {
  QR_REDUCED_MODE_FULL_TERMS = 0,
  QR_REDUCED_MODE_RWA_ONLY = 1,
} QrReducedMode;

typedef enum QrStatus {
  QR_STATUS_OK = 0,
  QR_STATUS_NULL_POINTER = 1,
  QR_STATUS_DOMAIN = 2,
  QR_STATUS_RANGE = 3,
  QR_STATUS_DIMENSION = 4,
  QR_STATUS_INDEX_OUT_OF_RANGE = 5,
  QR_STATUS_TOLERANCE = 6,
  QR_STATUS_CONFIG = 7,
  QR_STATUS_BUFFER_TOO_SMALL = 8,
  QR_STATUS_PANIC = 9,
} QrStatus;

/**
 * Opaque model configuration.
 */
typedef struct QrModel QrModel;

/**
 * Opaque integration result.
 */
typedef struct QrTrajectory QrTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, NUL-terminated, into
 * `buf` (truncating to `len - 1` bytes). Returns the full message length.
 */
size_t qr_last_error_message(char *buf, size_t len);

/**
 * Creates a model. `param` is `2K` for su(1,1), `2J` for su(2), unused for
 * the oscillator.
 */
enum QrStatus qr_model_new(size_t n,
                           enum QrAlgebraKind kind,
                           double param,
                           double omega,
                           double g,
                           double delta_abs,
                           double delta_phase,
                           size_t trunc_dim,
                           struct QrModel **out_model);

void qr_model_free(struct QrModel *model);

/**
 * Copy of `model` with `|D|` replaced.
 */
enum QrStatus qr_model_with_delta_abs(const struct QrModel *src,
                                      double delta_abs,
                                      struct QrModel **out_model);

/**
 * `<n| D(z) |m>` from the closed forms.
 */
enum QrStatus qr_matelem(enum QrAlgebraKind kind,
                         double param,
                         uint32_t n,
                         uint32_t m,
                         double z_re,
                         double z_im,
                         double *out_re,
                         double *out_im);

enum QrStatus qr_theta(const struct QrModel *model_, size_t m, size_t j, double *out_value);

enum QrStatus qr_rabi_frequency(const struct QrModel *model_,
                                size_t m,
                                size_t r,
                                size_t j,
                                size_t j_prime,
                                double *out_re,
                                double *out_im);

/**
 * Resonant `|D|`; `*out_found` is 0 when there is no positive solution.
 */
enum QrStatus qr_resonance_solve(const struct QrModel *model_,
                                 size_t m,
                                 size_t r,
                                 size_t j,
                                 size_t j_prime,
                                 int32_t *out_found,
                                 double *out_delta_abs,
                                 double *out_residual);

/**
 * Writes the `n` channels as `(j', j)` pairs into `out_pairs[2n]`.
 */
enum QrStatus qr_channel_enumerate(size_t n,
                                   size_t m,
                                   size_t r,
                                   size_t *out_pairs,
                                   size_t capacity);

/**
 * `a0` and `out_a` hold `(re, im)` of the two amplitudes.
 */
enum QrStatus qr_rwa_two_level_evolve(double rabi_re,
                                      double rabi_im,
                                      double t,
                                      const double *a0,
                                      double *out_a);

/**
 * Integrates the reduced equations on `steps` equal intervals of
 * `[t_start, t_stop]`. `a0` holds `n * n_levels` amplitudes as `(re, im)`.
 */
enum QrStatus qr_integrate_reduced(const struct QrModel *model_,
                                   const size_t *levels,
                                   size_t n_levels,
                                   double t_start,
                                   double t_stop,
                                   size_t steps,
                                   const double *a0,
                                   enum QrReducedMode mode,
                                   double tol,
                                   struct QrTrajectory **out_trajectory);

void qr_trajectory_free(struct QrTrajectory *trajectory);

/**
 * Number of time points and amplitudes per point.
 */
enum QrStatus qr_trajectory_shape(const struct QrTrajectory *trajectory,
                                  size_t *out_times,
                                  size_t *out_width);

enum QrStatus qr_trajectory_norm_drift(const struct QrTrajectory *trajectory, double *out_value);

/**
 * Time and amplitudes (`(re, im)` pairs, `2 * width` doubles) at `index`.
 */
enum QrStatus qr_trajectory_point(const struct QrTrajectory *trajectory,
                                  size_t index,
                                  double *out_time,
                                  double *out_amplitudes,
                                  size_t capacity);

size_t qr_elementary_count(size_t n);

/**
 * Row-major real `n^2 x n^2` permutation matrix of the controlled shift.
 */
enum QrStatus qr_controlled_shift_target(size_t n,
                                         enum QrControlWire control,
                                         double *out_matrix,
                                         size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUDIT_RABI_H */
