/* C interface to the ptyterm library. */

#ifndef PTYTERM_H
#define PTYTERM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum PtyStatus {
  PTY_OK = 0,
  PTY_PARSE_ERROR = 1,
  PTY_EVAL_ERROR = 2,
  PTY_CHECK_ERROR = 3,
  PTY_TRANSFORM_ERROR = 4,
  PTY_INVALID_ARGUMENT = 5,
} PtyStatus;

/**
 * Evaluation mode selector.
 */
typedef enum PtyMode {
  PTY_CBV = 0,
  PTY_CBN = 1,
} PtyMode;

/**
 * Opaque handle to a checked derivation and its mode.
 */
typedef struct PtyDerivation PtyDerivation;

/**
 * Opaque handle to a parsed term and its mode.
 */
typedef struct PtyTerm PtyTerm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the message of the most recent failure on this thread, or NULL.
 * The caller owns the returned string.
 */
char *ptyterm_last_error(void);

/**
 * Frees a string produced by this library. NULL is ignored.
 *
 * # Safety
 * `s` must have been returned by a `ptyterm_` function and not yet freed.
 */
void ptyterm_string_free(char *s);

/**
 * Parses `source` under `mode`, with optional CbV desugaring of non-value
 * applications. On success stores a new handle in `*out`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PtyStatus ptyterm_parse(const char *source,
                             enum PtyMode mode,
                             bool desugar,
                             struct PtyTerm **out);

/**
 * # Safety
 * `t` must be a live handle from [`ptyterm_parse`] (or NULL).
 */
void ptyterm_term_free(struct PtyTerm *t);

/**
 * Prints the term in the concrete grammar; the output re-parses.
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum PtyStatus ptyterm_term_print(const struct PtyTerm *t, char **out);

/**
 * P^k: the probability of reaching a value within `steps` steps, written
 * as an exact rational.
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum PtyStatus ptyterm_p_approx(const struct PtyTerm *t, uintptr_t steps, char **out);

/**
 * eT^k: the expected-runtime approximant, written as an exact rational.
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum PtyStatus ptyterm_et_approx(const struct PtyTerm *t, uintptr_t steps, char **out);

/**
 * The first `steps`+1 states of the reduction sequence, one per line,
 * each as `<p term, ...>`.
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum PtyStatus ptyterm_eval_trace(const struct PtyTerm *t, uintptr_t steps, char **out);

/**
 * Parses a derivation file and checks every node. On success stores a new
 * handle in `*out`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PtyStatus ptyterm_derivation_parse(const char *source,
                                        enum PtyMode mode,
                                        struct PtyDerivation **out);

/**
 * # Safety
 * `d` must be a live handle (or NULL).
 */
void ptyterm_derivation_free(struct PtyDerivation *d);

/**
 * Serializes the derivation in the s-expression file format.
 *
 * # Safety
 * `d` must be a live handle and `out` a valid pointer.
 */
enum PtyStatus ptyterm_derivation_print(const struct PtyDerivation *d, char **out);

/**
 * One-line summary `weight=<rat> type=<type> tight=<bool> norm=<rat|n/a>`,
 * matching the `check` subcommand of the CLI.
 *
 * # Safety
 * `d` must be a live handle and `out` a valid pointer.
 */
enum PtyStatus ptyterm_derivation_summary(const struct PtyDerivation *d, char **out);

/**
 * Synthesizes a tight derivation (or a null one when `null_type` is set)
 * witnessing the k-step approximants of the term.
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum PtyStatus ptyterm_synthesize(const struct PtyTerm *t,
                                  uintptr_t steps,
                                  bool null_type,
                                  struct PtyDerivation **out);

/**
 * Applies weighted subject reduction and returns the branch derivations as
 * a stream of s-expressions separated by blank lines.
 *
 * # Safety
 * `d` must be a live handle and `out` a valid pointer.
 */
enum PtyStatus ptyterm_subject_reduce(const struct PtyDerivation *d, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTYTERM_H */
