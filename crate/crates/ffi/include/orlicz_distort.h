#ifndef ORLICZ_DISTORT_H
#define ORLICZ_DISTORT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OdStatus {
  OD_STATUS_OK = 0,
  OD_STATUS_NULL_POINTER = 1,
  OD_STATUS_INVALID_UTF8 = 2,
  OD_STATUS_MALFORMED_SPEC = 3,
  OD_STATUS_INVALID_PARAMETER = 4,
  OD_STATUS_DOMAIN = 5,
  OD_STATUS_RANGE = 6,
  OD_STATUS_CONDITION_FAILED = 7,
  OD_STATUS_INCONCLUSIVE = 8,
  OD_STATUS_NUMERICAL = 9,
  OD_STATUS_INPUT = 10,
  OD_STATUS_IO = 11,
  OD_STATUS_PANIC = 12,
} OdStatus;

typedef struct OdBundle OdBundle;

typedef struct OdGauge OdGauge;

typedef struct OdYoung OdYoung;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *od_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *od_version(void);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OdStatus od_young_from_json(const char *json, struct OdYoung **out);

/**
 * `A(t)`.
 *
 * # Safety
 * `y` must come from `od_young_from_json`; `out` must be valid.
 */
enum OdStatus od_young_eval(const struct OdYoung *y, double t, double *out);

/**
 * `A^{-1}(s)`.
 *
 * # Safety
 * `y` must come from `od_young_from_json`; `out` must be valid.
 */
enum OdStatus od_young_inverse(const struct OdYoung *y, double s, double *out);

/**
 * # Safety
 * `y` must come from `od_young_from_json` and not be used afterwards.
 */
void od_young_free(struct OdYoung *y);

/**
 * Parses `{"n": .., "family": .., ...}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OdStatus od_gauge_from_json(const char *json, struct OdGauge **out);

/**
 * Normalized gauge value `φ°(r)`.
 *
 * # Safety
 * `g` must come from `od_gauge_from_json`; `out` must be valid.
 */
enum OdStatus od_gauge_eval(const struct OdGauge *g, double r, double *out);

/**
 * # Safety
 * `g` must come from `od_gauge_from_json` and not be used afterwards.
 */
void od_gauge_free(struct OdGauge *g);

/**
 * Builds the distortion gauge of `a` and `phi` in dimension `n`.
 *
 * # Safety
 * `a` and `phi` must be live handles; `out` must be valid.
 */
enum OdStatus od_bundle_build(const struct OdYoung *a,
                              const struct OdGauge *phi,
                              size_t n,
                              struct OdBundle **out);

/**
 * `ψ(r)`.
 *
 * # Safety
 * `b` must come from `od_bundle_build`; `out` must be valid.
 */
enum OdStatus od_bundle_psi(const struct OdBundle *b, double r, double *out);

/**
 * Relative gap `ψ(st) / (φ(t) + t^n B(s)) - 1`; non-positive when the key
 * inequality holds.
 *
 * # Safety
 * `b` must come from `od_bundle_build`; `out` must be valid.
 */
enum OdStatus od_bundle_key_gap(const struct OdBundle *b, double s, double t, double *out);

/**
 * # Safety
 * `b` must come from `od_bundle_build` and not be used afterwards.
 */
void od_bundle_free(struct OdBundle *b);

/**
 * Constant of the quantitative Kaufman bound.
 *
 * # Safety
 * `out` must be valid.
 */
enum OdStatus od_kaufman_constant(size_t n, double p, double alpha, double c_n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORLICZ_DISTORT_H */
