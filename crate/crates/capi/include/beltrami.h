/* C interface of the Beltrami field laboratory. */

#ifndef BELTRAMI_H
#define BELTRAMI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/* Opaque handles; created and destroyed by the library only. */
typedef struct BeltramiField BeltramiField;
typedef struct BeltramiScalar BeltramiScalar;
typedef struct BeltramiReport BeltramiReport;

/**
 * Status of a call.
 */
typedef enum BeltramiCode {
  BELTRAMI_CODE_OK = 0,
  /**
   * Bad argument or malformed input data.
   */
  BELTRAMI_CODE_INVALID_ARGUMENT = 1,
  /**
   * Filesystem failure.
   */
  BELTRAMI_CODE_IO = 2,
  /**
   * Numerical failure (stagnation, degenerate geometry, non-finite data).
   */
  BELTRAMI_CODE_NUMERIC = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  BELTRAMI_CODE_UTF8 = 4,
  /**
   * A required pointer was null.
   */
  BELTRAMI_CODE_NULL_POINTER = 5,
} BeltramiCode;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, as a static NUL-terminated string.
 */
const char *beltrami_version(void);

/**
 * Message of the most recent failure on this thread; empty string when
 * the last call succeeded. Valid until the next API call on this thread.
 */
const char *beltrami_last_error(void);

/**
 * Read a vector field CSV artifact.
 */
enum BeltramiCode beltrami_field_read_csv(const char *path, BeltramiField **out);

/**
 * Write a vector field back to a CSV artifact.
 */
enum BeltramiCode beltrami_field_write_csv(const BeltramiField *field, const char *path);

void beltrami_field_free(BeltramiField *field);

/**
 * Read a scalar chart CSV artifact.
 */
enum BeltramiCode beltrami_scalar_read_csv(const char *path, BeltramiScalar **out);

void beltrami_scalar_free(BeltramiScalar *scalar);

/**
 * Classical three-mode field with unit factor on a seamless periodic
 * cube with `n` cells per axis over `[lo, hi)`.
 */
enum BeltramiCode beltrami_abc_field(double a,
                                     double b,
                                     double c,
                                     double lo,
                                     double hi,
                                     uintptr_t n,
                                     BeltramiField **out);

/**
 * Defect of the curl relation for `field` against a factor: the scalar
 * chart `factor` when non-null, otherwise the constant `constant`.
 * `periodic` selects wrap-around difference stencils.
 */
enum BeltramiCode beltrami_residual_report(const BeltramiField *field,
                                           const BeltramiScalar *factor,
                                           double constant,
                                           bool periodic,
                                           BeltramiReport **out);

/**
 * Number of entries in a report.
 */
uintptr_t beltrami_report_len(const BeltramiReport *report);

/**
 * Copy the name of entry `index` into `buf` (NUL-terminated, truncating
 * never: fails instead when `cap` is too small).
 */
enum BeltramiCode beltrami_report_entry_name(const BeltramiReport *report,
                                             uintptr_t index,
                                             char *buf,
                                             uintptr_t cap);

/**
 * Max norm of the named entry.
 */
enum BeltramiCode beltrami_report_norm_inf(const BeltramiReport *report,
                                           const char *name,
                                           double *out);

/**
 * Grid L2 norm of the named entry.
 */
enum BeltramiCode beltrami_report_norm_l2(const BeltramiReport *report,
                                          const char *name,
                                          double *out);

/**
 * Serialize a report to pretty JSON at `path`.
 */
enum BeltramiCode beltrami_report_write_json(const BeltramiReport *report, const char *path);

void beltrami_report_free(BeltramiReport *report);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* BELTRAMI_H */
