#ifndef NCFR_H
#define NCFR_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum NcfrStatus {
  NCFR_STATUS_OK = 0,
  NCFR_STATUS_ORDER_EXCEEDED = 1,
  NCFR_STATUS_SINGULAR_PENCIL = 2,
  NCFR_STATUS_SINGULAR_AT_ZERO = 3,
  NCFR_STATUS_NOT_PURE = 4,
  NCFR_STATUS_INDETERMINATE = 5,
  NCFR_STATUS_NOT_CONTRACTIVE = 6,
  NCFR_STATUS_INNER_SYMBOL = 7,
  NCFR_STATUS_NOT_POSITIVE = 8,
  NCFR_STATUS_NOT_HERMITIAN = 9,
  NCFR_STATUS_CAP_EXCEEDED = 10,
  NCFR_STATUS_SYNTAX_ERROR = 11,
  NCFR_STATUS_UNKNOWN_VARIABLE = 12,
  NCFR_STATUS_DIMENSION_MISMATCH = 13,
  NCFR_STATUS_INVALID_INPUT = 14,
  NCFR_STATUS_NULL_POINTER = 15,
  NCFR_STATUS_PANIC = 16,
} NcfrStatus;

/**
 * Verdict of [`ncfr_classify`].
 */
typedef enum NcfrVerdict {
  NCFR_VERDICT_INNER = 0,
  NCFR_VERDICT_NON_CE = 1,
  NCFR_VERDICT_NOT_CONTRACTIVE = 2,
  NCFR_VERDICT_INDETERMINATE = 3,
} NcfrVerdict;

/**
 * Opaque finite-dimensional realization `D + C (I − Σ Z_j ⊗ A_j)⁻¹ Σ Z_j ⊗ B_j`.
 */
typedef struct NcfrRealization NcfrRealization;

/**
 * Defects measured by [`ncfr_verify_column`] and [`ncfr_verify_factor`].
 */
typedef struct NcfrReport {
  double colligation_defect_iso;
  double colligation_defect_coiso;
  double coefficient_defect;
  size_t order;
  bool pass;
} NcfrReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ncfr_version(void);

/**
 * Message of the last failed call on this thread, or NULL.
 *
 * After [`ncfr_classify`] returns an uncertified verdict it holds the reason instead.
 *
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *ncfr_last_error_message(void);

/**
 * Byte offset into the input text of the last parse error, or -1.
 */
int64_t ncfr_last_error_location(void);

/**
 * Parses and realizes an expression in `z1..zd`.
 *
 * # Safety
 * `text_ptr` must be a NUL-terminated string and `out` a writable pointer.
 */
enum NcfrStatus ncfr_parse(const char *text_ptr, size_t d, struct NcfrRealization **out);

/**
 * Reads a realization from its JSON form `{d, n, A, B, C, D}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum NcfrStatus ncfr_realization_from_json(const char *json, struct NcfrRealization **out);

/**
 * Writes the JSON form of `r` to `*out`; release it with [`ncfr_string_free`].
 *
 * # Safety
 * `r` must be a live handle and `out` a writable pointer.
 */
enum NcfrStatus ncfr_realization_to_json(const struct NcfrRealization *r, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void ncfr_string_free(char *s);

/**
 * # Safety
 * `r` must be NULL or a handle returned by this library and not yet freed.
 */
void ncfr_realization_free(struct NcfrRealization *r);

/**
 * Alphabet size `d` and state dimension `n`.
 *
 * # Safety
 * `r` must be a live handle; `d` and `n` may be NULL.
 */
enum NcfrStatus ncfr_realization_dims(const struct NcfrRealization *r, size_t *d, size_t *n);

/**
 * Coefficient of the word `letters[0..len]` (letters are 1-based), written as `out[0] + i out[1]`.
 *
 * # Safety
 * `letters` must point to `len` bytes (or be NULL when `len == 0`) and `out` to two doubles.
 */
enum NcfrStatus ncfr_coeff(const struct NcfrRealization *r,
                           const uint8_t *letters,
                           size_t len,
                           double *out);

/**
 * Evaluates at a tuple of `d` square matrices of size `n`.
 *
 * `z` holds `d·n·n` complex entries as interleaved `(re, im)` doubles, each
 * matrix row-major; `out` receives `n·n` complex entries in the same layout.
 *
 * # Safety
 * `z` must point to `2·d·n·n` doubles and `out` to `2·n·n` writable doubles.
 */
enum NcfrStatus ncfr_eval(const struct NcfrRealization *r, const double *z, size_t n, double *out);

/**
 * Minimal realization of the same series.
 *
 * # Safety
 * `r` must be a live handle and `out` a writable pointer.
 */
enum NcfrStatus ncfr_minimize(const struct NcfrRealization *r,
                              double tol,
                              struct NcfrRealization **out);

/**
 * Classifies a contractive `b`; `a0_squared` receives `|a(0)|²`.
 *
 * An uncertified verdict is not an error: the call returns `Ok` and the reason
 * is readable through [`ncfr_last_error_message`].
 *
 * # Safety
 * `b` must be a live handle; `verdict` and `a0_squared` must be writable.
 */
enum NcfrStatus ncfr_classify(const struct NcfrRealization *b,
                              enum NcfrVerdict *verdict,
                              double *a0_squared);

/**
 * Outer Sarason function `a` of `b`.
 *
 * # Safety
 * `b` must be a live handle and `out` a writable pointer.
 */
enum NcfrStatus ncfr_sarason(const struct NcfrRealization *b, struct NcfrRealization **out);

/**
 * Checks that the column `(b; a)` is inner up to word length `n`.
 *
 * # Safety
 * `b` and `a` must be live handles and `out` writable.
 */
enum NcfrStatus ncfr_verify_column(const struct NcfrRealization *b,
                                   const struct NcfrRealization *a,
                                   size_t n,
                                   double tol,
                                   struct NcfrReport *out);

/**
 * Outer factor `f` with Toeplitz symbol `f* f` equal to that of the Herglotz function `h`.
 *
 * # Safety
 * `h` must be a live handle and `out` a writable pointer.
 */
enum NcfrStatus ncfr_factor_toeplitz(const struct NcfrRealization *h, struct NcfrRealization **out);

/**
 * Checks a factor returned by [`ncfr_factor_toeplitz`] up to word length `n`.
 *
 * # Safety
 * `h` and `f` must be live handles and `out` writable.
 */
enum NcfrStatus ncfr_verify_factor(const struct NcfrRealization *h,
                                   const struct NcfrRealization *f,
                                   size_t n,
                                   double tol,
                                   struct NcfrReport *out);

/**
 * Outer factor of `r* r` for a rational `r`.
 *
 * # Safety
 * `r` must be a live handle and `out` a writable pointer.
 */
enum NcfrStatus ncfr_square_factor(const struct NcfrRealization *r, struct NcfrRealization **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NCFR_H */
