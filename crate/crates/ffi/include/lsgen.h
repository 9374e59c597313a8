#ifndef LSGEN_H
#define LSGEN_H

#pragma once

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LsgenStatus {
  LSGEN_STATUS_OK = 0,
  LSGEN_STATUS_NULL_POINTER = 1,
  LSGEN_STATUS_INVALID_UTF8 = 2,
  LSGEN_STATUS_PARSE_ERROR = 3,
  LSGEN_STATUS_ENCODE_ERROR = 4,
  LSGEN_STATUS_INVALID_ARGUMENT = 5,
  LSGEN_STATUS_PANIC = 6,
} LsgenStatus;

typedef enum LsgenSolveResult {
  LSGEN_SOLVE_RESULT_SAT = 10,
  LSGEN_SOLVE_RESULT_UNSAT = 20,
  LSGEN_SOLVE_RESULT_TIMEOUT = 0,
} LsgenSolveResult;

typedef enum LsgenSignificance {
  LSGEN_SIGNIFICANCE_BETTER = -1,
  LSGEN_SIGNIFICANCE_NO_CHANGE = 0,
  LSGEN_SIGNIFICANCE_WORSE = 1,
} LsgenSignificance;

/**
 * Opaque CNF formula.
 */
typedef struct LsgenFormula LsgenFormula;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *lsgen_last_error(void);

/**
 * Parses DIMACS CNF text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LsgenStatus lsgen_formula_parse(const char *text, struct LsgenFormula **out);

/**
 * # Safety
 * `f` must come from this library and not be freed twice. Null is ignored.
 */
void lsgen_formula_free(struct LsgenFormula *f);

/**
 * # Safety
 * `f` must be a live handle or null (which yields 0).
 */
uint32_t lsgen_formula_num_vars(const struct LsgenFormula *f);

/**
 * # Safety
 * `f` must be a live handle or null (which yields 0).
 */
size_t lsgen_formula_num_clauses(const struct LsgenFormula *f);

/**
 * Number of clauses falsified by a total assignment.
 *
 * # Safety
 * `values` must hold `len` bytes and `out_unsat` must be valid.
 */
enum LsgenStatus lsgen_count_unsat(const struct LsgenFormula *f,
                                   const uint8_t *values,
                                   size_t len,
                                   size_t *out_unsat);

/**
 * Make and break counts for flipping variable `var` (1-based).
 *
 * # Safety
 * `values` must hold `len` bytes; `out_make` and `out_break` must be valid.
 */
enum LsgenStatus lsgen_conflict_score(const struct LsgenFormula *f,
                                      const uint8_t *values,
                                      size_t len,
                                      uint32_t var,
                                      uint32_t *out_make,
                                      uint32_t *out_break);

/**
 * Encodes an instance with a named scheme (`coloring`, `dfvs`, `bddt`).
 * A negative `bound` selects the scheme's heuristic bound. The variable
 * map is returned as JSON and must be released with `lsgen_string_free`.
 *
 * # Safety
 * String arguments must be NUL-terminated; output pointers must be valid.
 */
enum LsgenStatus lsgen_encode(const char *scheme,
                              const char *instance,
                              int64_t bound,
                              struct LsgenFormula **out_formula,
                              char **out_varmap_json,
                              int64_t *out_bound);

/**
 * # Safety
 * `s` must come from this library. Null is ignored.
 */
void lsgen_string_free(char *s);

/**
 * WalkSAT from a random start. `max_flips` of 0 means unlimited. Writes
 * the best assignment into `out_values` (`len` = number of variables).
 *
 * # Safety
 * `out_values` must hold `len` bytes and `out_found` must be valid.
 */
enum LsgenStatus lsgen_walksat(const struct LsgenFormula *f,
                               uint64_t seed,
                               uint64_t max_flips,
                               double timeout_secs,
                               uint8_t *out_values,
                               size_t len,
                               bool *out_found);

/**
 * Runs the mini solver with the given phases. On SAT the model is written
 * into `out_model` (`len` bytes); it is left untouched otherwise.
 *
 * # Safety
 * `phases` and `out_model` must hold `len` bytes; `out_result` must be valid.
 */
enum LsgenStatus lsgen_mini_solve(const struct LsgenFormula *f,
                                  const uint8_t *phases,
                                  size_t len,
                                  double timeout_secs,
                                  uint8_t *out_model,
                                  enum LsgenSolveResult *out_result);

/**
 * Refinement feedback for two average runtimes in seconds.
 */
enum LsgenSignificance lsgen_significance(double prev_avg, double new_avg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSGEN_H */
