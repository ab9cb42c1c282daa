#ifndef SEPSPLIT_H
#define SEPSPLIT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every exported call.
typedef enum SepStatus {
  SEP_STATUS_OK = 0,
  SEP_STATUS_NULL_POINTER = 1,
  SEP_STATUS_INVALID_ARGUMENT = 2,
  // A hypothesis of the asymptotic theory fails for this input.
  SEP_STATUS_HYPOTHESIS = 3,
  SEP_STATUS_NUMERICAL = 4,
  SEP_STATUS_PARSE = 5,
  // A Rust panic was caught at the boundary.
  SEP_STATUS_PANIC = 6,
} SepStatus;

// Leading-order splitting coefficients at one ε.
typedef struct SepCoefficients SepCoefficients;

// Saddle connection of a [`SepSystem`].
typedef struct SepOrbit SepOrbit;

// Unperturbed field, perturbation profile and forcing.
typedef struct SepSystem SepSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null.
//
// The pointer stays valid until the next failing call on the same thread.
const char *sep_last_error(void);

// Library version as a static NUL-terminated string.
const char *sep_version(void);

// Periodic system `x'' = f(x) + 2 ε^r q(x/ε, x') cos(t/ε)`.
//
// `f` is an expression in `x`; `q` in `xi` and `v`. `saddle_guess` seeds
// the saddle search.
//
// # Safety
// `f` and `q` must be NUL-terminated strings; `out` must be writable.
enum SepStatus sep_system_new(const char *f,
                              const char *q,
                              double r,
                              double saddle_guess,
                              struct SepSystem **out);

// One of the catalog systems: `pendulum-em`, `pendulum-qp` or `cubic`.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum SepStatus sep_system_from_example(const char *name, double r, struct SepSystem **out);

// # Safety
// `sys` must come from a `sep_system_*` constructor, or be null.
void sep_system_free(struct SepSystem *sys);

// Compute the saddle connection leaving along the unstable direction
// with sign `branch` (`+1` or `-1`).
//
// # Safety
// `sys` must be a live handle; `out` must be writable.
enum SepStatus sep_orbit_compute(const struct SepSystem *sys,
                                 int32_t branch,
                                 struct SepOrbit **out);

// # Safety
// `orbit` must come from [`sep_orbit_compute`], or be null.
void sep_orbit_free(struct SepOrbit *orbit);

// Position and velocity on the connection at time `t`.
//
// # Safety
// `orbit` must be a live handle; `x` and `v` must be writable.
enum SepStatus sep_orbit_eval(const struct SepOrbit *orbit, double t, double *x, double *v);

// Saddle eigenvalue λ of the connection.
//
// # Safety
// `orbit` must be a live handle; `out` must be writable.
enum SepStatus sep_orbit_lambda(const struct SepOrbit *orbit, double *out);

// Stationary-phase splitting coefficients at `eps`.
//
// # Safety
// `sys` and `orbit` must be live handles; `out` must be writable.
enum SepStatus sep_coefficients_compute(const struct SepSystem *sys,
                                        const struct SepOrbit *orbit,
                                        double eps,
                                        struct SepCoefficients **out);

// # Safety
// `c` must come from [`sep_coefficients_compute`], or be null.
void sep_coefficients_free(struct SepCoefficients *c);

// `𝒜` and `ℬ` of a periodic problem.
//
// # Safety
// `c` must be a live handle; `a` and `b` must be writable.
enum SepStatus sep_coefficients_ab(const struct SepCoefficients *c, double *a, double *b);

// Amplitude of the leading term, in units of `ε^{r+1/2}`.
//
// # Safety
// `c` must be a live handle; `out` must be writable.
enum SepStatus sep_coefficients_amplitude(const struct SepCoefficients *c, double *out);

// Leading-order displacement at phase `t0` for the ε the coefficients were computed at.
//
// # Safety
// `c` must be a live handle; `out` must be writable.
enum SepStatus sep_coefficients_predict(const struct SepCoefficients *c, double t0, double *out);

// Melnikov integral at `(eps, t0)` by direct quadrature.
//
// # Safety
// `sys` and `orbit` must be live handles; `out` must be writable.
enum SepStatus sep_melnikov(const struct SepSystem *sys,
                            const struct SepOrbit *orbit,
                            double eps,
                            double t0,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEPSPLIT_H */
