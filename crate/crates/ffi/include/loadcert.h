#ifndef LOADCERT_H
#define LOADCERT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_POINTER = 1,
  LC_STATUS_INVALID_UTF8 = 2,
  LC_STATUS_PARSE = 3,
  LC_STATUS_NUMERIC = 4,
  LC_STATUS_DIMENSION_MISMATCH = 5,
  LC_STATUS_NOT_CONVERGED = 6,
  LC_STATUS_PANIC = 99,
} LcStatus;

/**
 * Opaque case handle.
 */
typedef struct LcCase LcCase;

typedef struct LcComplex {
  double re;
  double im;
} LcComplex;

/**
 * Certificate summary. Radii and known-point fields are NaN when the
 * corresponding condition was not evaluated or did not pass.
 */
typedef struct LcCertificate {
  bool has_theorem;
  bool theorem_ok;
  double xi_s_hat;
  double xi_delta_s;
  double u_min;
  double delta;
  double theorem_rho;
  bool corollary_ok;
  double xi_s;
  double corollary_rho;
  bool bolognani_ok;
  bool improved_ok;
} LcCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a network document and prepares a case. On success `*out` owns
 * a handle to release with [`lc_case_free`].
 *
 * # Safety
 * `network_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LcStatus lc_case_from_toml(const char *network_toml, struct LcCase **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `case` must come from [`lc_case_from_toml`] and not be used afterwards.
 */
void lc_case_free(struct LcCase *case_);

/**
 * Number of load buses, or 0 for a null handle.
 *
 * # Safety
 * `case` must be null or a live handle.
 */
size_t lc_case_load_count(const struct LcCase *case_);

/**
 * Copies the zero-load voltage profile into `out[0..len]`.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum LcStatus lc_case_zero_load(const struct LcCase *case_, struct LcComplex *out, size_t len);

/**
 * Stores a known solution pair used by [`lc_case_certify`]. Passing
 * `len == 0` clears it.
 *
 * # Safety
 * `v` and `s` must hold `len` values each.
 */
enum LcStatus lc_case_set_operating_point(struct LcCase *case_,
                                          const struct LcComplex *v,
                                          const struct LcComplex *s,
                                          size_t len);

/**
 * Loading measure of `s`.
 *
 * # Safety
 * `s` must hold `len` values and `out` be a valid pointer.
 */
enum LcStatus lc_case_xi(const struct LcCase *case_,
                         const struct LcComplex *s,
                         size_t len,
                         double *out);

/**
 * Evaluates every condition set for target `s`, including the known-point
 * conditions when an operating point is set.
 *
 * # Safety
 * `s` must hold `len` values and `out` be a valid pointer.
 */
enum LcStatus lc_case_certify(const struct LcCase *case_,
                              const struct LcComplex *s,
                              size_t len,
                              struct LcCertificate *out);

/**
 * Fixed-point solve from the zero-load profile. Writes the last iterate to
 * `v_out` even when the iteration does not converge.
 *
 * # Safety
 * `s` and `v_out` must hold `len` values; `iterations` may be null.
 */
enum LcStatus lc_case_solve(const struct LcCase *case_,
                            const struct LcComplex *s,
                            size_t len,
                            double tol,
                            size_t max_iter,
                            struct LcComplex *v_out,
                            size_t *iterations);

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *lc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOADCERT_H */
