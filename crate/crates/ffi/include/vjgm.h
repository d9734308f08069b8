#ifndef VJGM_H
#define VJGM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VjgmStatus {
  VJGM_STATUS_OK = 0,
  VJGM_STATUS_NULL = 1,
  VJGM_STATUS_INVALID_ARGUMENT = 2,
  VJGM_STATUS_NUMERIC = 3,
  VJGM_STATUS_BUFFER_TOO_SMALL = 4,
  VJGM_STATUS_PANIC = 5,
} VjgmStatus;

// A variational posterior produced by [`vjgm_filter`] or [`vjgm_smooth`].
typedef struct VjgmPosterior VjgmPosterior;

// A jump Gauss-Markov system.
typedef struct VjgmSystem VjgmSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates the staircase model with `m` regimes and horizon `horizon`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum VjgmStatus vjgm_staircase_new(size_t m,
                                   double p,
                                   double phi0,
                                   double sigma0,
                                   double r,
                                   size_t horizon,
                                   struct VjgmSystem **out);

// # Safety
// `sys` must be null or a handle from [`vjgm_staircase_new`] not yet freed.
void vjgm_system_free(struct VjgmSystem *sys);

// Number of time points `T + 1`.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum VjgmStatus vjgm_system_len(const struct VjgmSystem *sys, size_t *out);

// # Safety
// `sys` must be a live handle and `out` writable.
enum VjgmStatus vjgm_system_num_regimes(const struct VjgmSystem *sys, size_t *out);

// Samples trial `trial` of seed `seed`.
//
// `z` receives `T + 1` regimes, `x` and `y` receive `T + 1` points each,
// stored contiguously with the state and observation dimension per point.
// `len` is the number of time points the buffers can hold.
//
// # Safety
// `sys` must be a live handle; the buffers must be writable for the sizes above.
enum VjgmStatus vjgm_simulate(const struct VjgmSystem *sys,
                              uint64_t seed,
                              uint64_t trial,
                              size_t *z,
                              double *x,
                              double *y,
                              size_t len);

// Runs VJGM(0) on `len` observations. The system's horizon is replaced by `len - 1`.
//
// The result holds the filter's terminal marginal propagated backward through
// its reverse kernels.
//
// # Safety
// `sys` must be a live handle, `y` readable for `len` points and `out` writable.
enum VjgmStatus vjgm_filter(const struct VjgmSystem *sys,
                            const double *y,
                            size_t len,
                            struct VjgmPosterior **out);

// Runs VJGM(`iters`).
//
// # Safety
// As for [`vjgm_filter`].
enum VjgmStatus vjgm_smooth(const struct VjgmSystem *sys,
                            const double *y,
                            size_t len,
                            size_t iters,
                            struct VjgmPosterior **out);

// # Safety
// `post` must be null or a handle not yet freed.
void vjgm_posterior_free(struct VjgmPosterior *post);

// # Safety
// `post` must be a live handle and `out` writable.
enum VjgmStatus vjgm_posterior_elbo(const struct VjgmPosterior *post, double *out);

// Number of time points.
//
// # Safety
// `post` must be a live handle and `out` writable.
enum VjgmStatus vjgm_posterior_len(const struct VjgmPosterior *post, size_t *out);

// Writes the regime probabilities `f_t` into `buf`.
//
// # Safety
// `post` must be a live handle and `buf` writable for `cap` values.
enum VjgmStatus vjgm_posterior_regime_probs(const struct VjgmPosterior *post,
                                            size_t t,
                                            double *buf,
                                            size_t cap);

// Writes the state mean of `g_t` into `buf`.
//
// # Safety
// `post` must be a live handle and `buf` writable for `cap` values.
enum VjgmStatus vjgm_posterior_state_mean(const struct VjgmPosterior *post,
                                          size_t t,
                                          double *buf,
                                          size_t cap);

// Writes the posterior as a NUL-terminated JSON document.
//
// `needed` (if non-null) receives the size including the terminator. Passing
// a null `buf` with `cap == 0` only queries the size.
//
// # Safety
// `post` must be a live handle and `buf` writable for `cap` bytes.
enum VjgmStatus vjgm_posterior_json(const struct VjgmPosterior *post,
                                    char *buf,
                                    size_t cap,
                                    size_t *needed);

// Copies the last error message of this thread into `buf`, NUL-terminated
// and truncated to fit. Returns the full size including the terminator.
//
// # Safety
// `buf` must be null or writable for `cap` bytes.
size_t vjgm_last_error(char *buf, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VJGM_H */
