/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DOMLP_H
#define DOMLP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DomlpError {
  DOMLP_ERROR_OK = 0,
  DOMLP_ERROR_NULL_POINTER = 1,
  DOMLP_ERROR_INVALID_UTF8 = 2,
  DOMLP_ERROR_PARSE = 3,
  DOMLP_ERROR_INVALID_INPUT = 4,
  DOMLP_ERROR_IO = 5,
  DOMLP_ERROR_NOT_OPTIMAL = 6,
  DOMLP_ERROR_BUFFER_TOO_SMALL = 7,
  DOMLP_ERROR_SOLVER = 8,
  DOMLP_ERROR_PANIC = 9,
} DomlpError;

typedef enum DomlpStatus {
  DOMLP_STATUS_OPTIMAL = 0,
  DOMLP_STATUS_INFEASIBLE = 1,
  DOMLP_STATUS_UNBOUNDED = 2,
} DomlpStatus;

/**
 * A parsed instance with its optional benchmark.
 */
typedef struct DomlpInstance DomlpInstance;

/**
 * Result of [`domlp_solve`].
 */
typedef struct DomlpReport DomlpReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *domlp_last_error_message(void);

/**
 * Parses an instance from a NUL-terminated JSON string.
 */
enum DomlpError domlp_instance_from_json(const char *json, struct DomlpInstance **out);

/**
 * Reads an instance file.
 */
enum DomlpError domlp_instance_from_file(const char *path, struct DomlpInstance **out);

enum DomlpError domlp_instance_num_states(const struct DomlpInstance *inst, size_t *out);

/**
 * Number of state-action pairs, the length of the occupation vector.
 */
enum DomlpError domlp_instance_num_pairs(const struct DomlpInstance *inst, size_t *out);

void domlp_instance_free(struct DomlpInstance *inst);

/**
 * Solves the instance in its own mode against its benchmark (or
 * without dominance rows when it has none). Infeasible and unbounded
 * problems still produce a report; check [`domlp_report_status`].
 */
enum DomlpError domlp_solve(const struct DomlpInstance *inst, struct DomlpReport **out);

enum DomlpError domlp_report_status(const struct DomlpReport *rep, enum DomlpStatus *out);

enum DomlpError domlp_report_objective(const struct DomlpReport *rep, double *out);

enum DomlpError domlp_report_dual_objective(const struct DomlpReport *rep, double *out);

enum DomlpError domlp_report_gap(const struct DomlpReport *rep, double *out);

/**
 * Copies the occupation measure (pair order: states ascending, actions
 * in file order) into `buf`, which must hold `len >= num_pairs` values.
 */
enum DomlpError domlp_report_occupation(const struct DomlpReport *rep, double *buf, size_t len);

/**
 * Number of dominance rows (and utility multipliers).
 */
enum DomlpError domlp_report_num_multipliers(const struct DomlpReport *rep, size_t *out);

/**
 * Copies `(eta, lambda)` per dominance row into two buffers of length `len`.
 */
enum DomlpError domlp_report_multipliers(const struct DomlpReport *rep,
                                         double *etas,
                                         double *weights,
                                         size_t len);

/**
 * Borrowed JSON rendering of the report, valid until the report is freed.
 */
enum DomlpError domlp_report_json(const struct DomlpReport *rep, const char **out);

void domlp_report_free(struct DomlpReport *rep);

/**
 * Constraint-sample bound `ceil((4/eps) (k ln(12/eps) + ln(2/delta)))`.
 */
enum DomlpError domlp_sample_count(double epsilon, double delta, size_t k, size_t *out);

/**
 * Increasing concave dominance of `X` over `Y` checked at the support of
 * `Y`. `holds` receives 1 or 0, `worst_margin` the smallest margin.
 */
enum DomlpError domlp_check_icv(const double *x_support,
                                const double *x_probs,
                                size_t x_len,
                                const double *y_support,
                                const double *y_probs,
                                size_t y_len,
                                int32_t *holds,
                                double *worst_margin);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOMLP_H */
