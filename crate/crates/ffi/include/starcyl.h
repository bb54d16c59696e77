#ifndef STARCYL_H
#define STARCYL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  STARCYL_STATUS_OK = 0,
  STARCYL_STATUS_NULL_POINTER = 1,
  STARCYL_STATUS_INVALID_ARGUMENT = 2,
  STARCYL_STATUS_NUMERICAL = 3,
  STARCYL_STATUS_IO = 4,
  STARCYL_STATUS_PANIC = 5,
} StarcylStatus;

/**
 * Experiment configuration; starts from the shipped defaults.
 */
typedef struct StarcylConfig StarcylConfig;

/**
 * A function on the cylinder ℝ × 𝕋, stored by its Fourier coefficients.
 */
typedef struct StarcylFunction StarcylFunction;

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next failure.
 */
const char *starcyl_last_error(void);

/**
 * Number of Fourier modes of a cylinder grid `grid_x × grid_t`.
 *
 * # Safety
 * `out` must be a valid pointer to writable memory.
 */
StarcylStatus starcyl_cylinder_modes(double box_length, size_t grid_x, size_t grid_t, size_t *out);

/**
 * Builds a function from `n_modes` interleaved coefficients, ordered by label with the circle
 * index fastest and each axis running from `-cutoff` to `cutoff`.
 *
 * # Safety
 * `coeffs` must point to `2 * n_modes` doubles; `out` must be writable.
 */
StarcylStatus starcyl_function_new(double box_length,
                                   size_t grid_x,
                                   size_t grid_t,
                                   const double *coeffs,
                                   size_t n_modes,
                                   StarcylFunction **out);

/**
 * Copies the coefficients of `f` into `out` (`2 * n_modes` doubles).
 *
 * # Safety
 * `f` must be a live handle; `out` must point to `2 * n_modes` writable doubles.
 */
StarcylStatus starcyl_function_coeffs(const StarcylFunction *f, double *out, size_t n_modes);

/**
 * # Safety
 * `f` must be NULL or a handle not yet freed.
 */
void starcyl_function_free(StarcylFunction *f);

/**
 * Deformed product `a ⋆ b` at deformation parameter `hbar`.
 *
 * # Safety
 * `a`, `b` must be live handles; `out` must be writable.
 */
StarcylStatus starcyl_star_product(const StarcylFunction *a,
                                   const StarcylFunction *b,
                                   double hbar,
                                   StarcylFunction **out);

/**
 * # Safety
 * `a` must be a live handle; `out` must be writable.
 */
StarcylStatus starcyl_involution(const StarcylFunction *a, StarcylFunction **out);

/**
 * Largest deviation of `{γ_a, γ_b}` from `2η_ab` for signature `(p, q)`.
 *
 * # Safety
 * `out` must be writable.
 */
StarcylStatus starcyl_clifford_residual(size_t p, size_t q, double *out);

/**
 * Loads a config file, or the defaults when `path` is NULL.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be writable.
 */
StarcylStatus starcyl_config_new(const char *path, StarcylConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
StarcylStatus starcyl_config_set(StarcylConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void starcyl_config_free(StarcylConfig *cfg);

/**
 * Runs one experiment. `passed` receives the overall verdict; when `report_json` is not NULL it
 * receives the report as JSON, to be released with [`starcyl_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle, `name` a NUL-terminated string, `passed` writable.
 */
StarcylStatus starcyl_run_experiment(const StarcylConfig *cfg,
                                     const char *name,
                                     bool *passed,
                                     char **report_json);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void starcyl_string_free(char *s);

#endif  /* STARCYL_H */
