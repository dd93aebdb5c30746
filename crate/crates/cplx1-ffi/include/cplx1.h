#ifndef CPLX1_H
#define CPLX1_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  CPLX1_STATUS_OK = 0,
  CPLX1_STATUS_VALIDATION = 1,
  CPLX1_STATUS_BUDGET = 2,
  CPLX1_STATUS_CERTIFICATION = 3,
  CPLX1_STATUS_PARSE = 4,
  CPLX1_STATUS_IO = 5,
  CPLX1_STATUS_NULL_POINTER = 6,
  CPLX1_STATUS_PANIC = 7,
} Cplx1Status;

/**
 * Integer matrix V (rows × t).
 */
typedef struct Cplx1Matrix Cplx1Matrix;

/**
 * Result of a density-increment run, with its JSON transcript.
 */
typedef struct Cplx1Report Cplx1Report;

/**
 * GPY weight evaluator for fixed (N, ω, b, η).
 */
typedef struct Cplx1Sieve Cplx1Sieve;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread ("" if none). Valid until the next failing call.
 */
const char *cplx1_last_error(void);

/**
 * Library version, static string.
 */
const char *cplx1_version(void);

/**
 * Build a matrix from `rows * cols` entries in row-major order.
 *
 * # Safety
 * `data` must point to `rows * cols` readable values; `out` must be writable.
 */
Cplx1Status cplx1_matrix_new(size_t rows,
                             size_t cols,
                             const int64_t *data,
                             Cplx1Matrix **out_matrix);

/**
 * Parse the text format `r t` followed by r rows of t integers.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
Cplx1Status cplx1_matrix_parse(const char *text, Cplx1Matrix **out_matrix);

/**
 * # Safety
 * `m` must come from `cplx1_matrix_new`/`cplx1_matrix_parse` and not be used afterwards.
 */
void cplx1_matrix_free(Cplx1Matrix *m);

/**
 * Rank, number of columns t and translation invariance.
 *
 * # Safety
 * `m` must be a live handle; out pointers must be writable.
 */
Cplx1Status cplx1_matrix_shape(const Cplx1Matrix *m,
                               size_t *out_rank,
                               size_t *out_t,
                               bool *out_translation_invariant);

/**
 * Cauchy–Schwarz complexity; −1 when infinite.
 *
 * # Safety
 * `m` must be a live handle; `out_complexity` must be writable.
 */
Cplx1Status cplx1_matrix_complexity(const Cplx1Matrix *m, int64_t *out_complexity);

/**
 * #{y ∈ A^t : V y = 0}, or pairwise-distinct solutions when `distinct`.
 *
 * # Safety
 * `m` must be a live handle, `set` must point to `len` values, `out_count` must be writable.
 */
Cplx1Status cplx1_count_solutions(const Cplx1Matrix *m,
                                  const int64_t *set,
                                  size_t len,
                                  bool distinct,
                                  uint64_t budget,
                                  uint64_t *out_count);

/**
 * c_{χ,2} for the bundled cutoff.
 */
double cplx1_sieve_factor(void);

/**
 * Prepare the weight ν for n ∈ [N] with modulus W = ∏_{p ≤ ω} p and R = N^η.
 *
 * # Safety
 * `out_sieve` must be writable.
 */
Cplx1Status cplx1_sieve_new(uint64_t n,
                            double omega,
                            int64_t b,
                            double eta,
                            Cplx1Sieve **out_sieve);

/**
 * # Safety
 * `s` must come from `cplx1_sieve_new` and not be used afterwards.
 */
void cplx1_sieve_free(Cplx1Sieve *s);

/**
 * Raw weight Λ(n) and normalized ν(n) = Λ(n)/c_{χ,2}.
 *
 * # Safety
 * `s` must be a live handle; out pointers must be writable.
 */
Cplx1Status cplx1_sieve_weight(const Cplx1Sieve *s, int64_t n, double *out_lambda, double *out_nu);

/**
 * Density increment on A ⊆ [−N, N] with the bundled constants.
 *
 * # Safety
 * `m` must be a live handle, `set` must point to `len` values, `out_report` must be writable.
 */
Cplx1Status cplx1_increment_run(const Cplx1Matrix *m,
                                const int64_t *set,
                                size_t len,
                                int64_t n,
                                Cplx1Report **out_report);

/**
 * Certified lower bound on #{y ∈ A^t : V y = 0} and the number of steps taken.
 *
 * # Safety
 * `r` must be a live handle; out pointers must be writable.
 */
Cplx1Status cplx1_report_bound(const Cplx1Report *r, uint64_t *out_bound, size_t *out_steps);

/**
 * JSON transcript; owned by the report.
 *
 * # Safety
 * `r` must be a live handle.
 */
const char *cplx1_report_json(const Cplx1Report *r);

/**
 * # Safety
 * `r` must come from `cplx1_increment_run` and not be used afterwards.
 */
void cplx1_report_free(Cplx1Report *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPLX1_H */
