#ifndef SAT2MAPF_H
#define SAT2MAPF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum S2mMode {
  S2M_MODE_PARALLEL = 0,
  S2M_MODE_SEQUENTIAL = 1,
  S2M_MODE_MONOTONE = 2,
} S2mMode;

typedef enum S2mStatus {
  S2M_STATUS_OK = 0,
  S2M_STATUS_NULL_POINTER = 1,
  S2M_STATUS_INVALID_UTF8 = 2,
  S2M_STATUS_PARSE = 3,
  S2M_STATUS_REDUCTION = 4,
  /**
   * The assignment does not satisfy the formula.
   */
  S2M_STATUS_NOT_SATISFYING = 5,
  S2M_STATUS_WITNESS = 6,
  S2M_STATUS_VALIDATION = 7,
  S2M_STATUS_ORACLE = 8,
  S2M_STATUS_BUFFER_TOO_SMALL = 9,
  S2M_STATUS_PANIC = 10,
} S2mStatus;

typedef enum S2mVariant {
  S2M_VARIANT_MONOTONE = 0,
  S2M_VARIANT_GENERAL = 1,
} S2mVariant;

typedef enum S2mVerdict {
  S2M_VERDICT_INFEASIBLE = 0,
  S2M_VERDICT_FEASIBLE = 1,
  S2M_VERDICT_UNKNOWN = 2,
} S2mVerdict;

/**
 * Parsed formula.
 */
typedef struct S2mFormula S2mFormula;

/**
 * Compiled instance together with its gadget layout.
 */
typedef struct S2mInstance S2mInstance;

/**
 * Timed plan for every agent of an instance.
 */
typedef struct S2mPlan S2mPlan;

typedef struct S2mValidation {
  bool feasible;
  uint64_t cost;
  /**
   * Meaningless when `has_dstar` is false.
   */
  uint64_t dstar;
  bool has_dstar;
  bool monotone;
  bool sequential;
} S2mValidation;

typedef struct S2mOracleResult {
  enum S2mVerdict verdict;
  /**
   * Same question with one move per timestep.
   */
  enum S2mVerdict sequential;
  uint64_t explored;
} S2mOracleResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL if none.
 * Release with `s2m_string_free`.
 */
char *s2m_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void s2m_string_free(char *s);

/**
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
enum S2mStatus s2m_formula_parse_dimacs(const char *text, struct S2mFormula **out);

/**
 * # Safety
 * `f` must be NULL or a live formula handle.
 */
void s2m_formula_free(struct S2mFormula *f);

/**
 * Number of variables, or 0 for NULL.
 *
 * # Safety
 * `f` must be NULL or a live formula handle.
 */
uint32_t s2m_formula_num_vars(const struct S2mFormula *f);

/**
 * # Safety
 * `f` must be NULL or a live formula handle.
 */
size_t s2m_formula_num_clauses(const struct S2mFormula *f);

/**
 * Brute-force search. On success `values[i]` holds variable `i+1` (0 or 1)
 * and `*satisfiable` says whether `values` is meaningful.
 *
 * # Safety
 * `values` must have room for `len` bytes; `satisfiable` must be writable.
 */
enum S2mStatus s2m_formula_solve(const struct S2mFormula *f,
                                 uint8_t *values,
                                 size_t len,
                                 bool *satisfiable);

/**
 * Compile a formula into a grid instance.
 *
 * # Safety
 * `f` must be a live formula handle and `out` writable.
 */
enum S2mStatus s2m_reduce(const struct S2mFormula *f,
                          enum S2mVariant variant,
                          struct S2mInstance **out);

/**
 * # Safety
 * `inst` must be NULL or a live instance handle.
 */
void s2m_instance_free(struct S2mInstance *inst);

/**
 * # Safety
 * `inst` must be NULL or a live instance handle.
 */
size_t s2m_instance_num_agents(const struct S2mInstance *inst);

/**
 * # Safety
 * `inst` must be NULL or a live instance handle.
 */
size_t s2m_instance_open_cells(const struct S2mInstance *inst);

/**
 * Sum of the agents' individual shortest-path distances.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` writable.
 */
enum S2mStatus s2m_instance_dstar(const struct S2mInstance *inst, uint64_t *out);

/**
 * The `.map` file contents.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` writable.
 */
enum S2mStatus s2m_instance_map_text(const struct S2mInstance *inst, char **out);

/**
 * The `.agents` file contents.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` writable.
 */
enum S2mStatus s2m_instance_agents_text(const struct S2mInstance *inst, char **out);

/**
 * The `.layout` file contents.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` writable.
 */
enum S2mStatus s2m_instance_layout_text(const struct S2mInstance *inst, char **out);

/**
 * Cost-d* plan from an assignment; `values[i]` is variable `i+1`.
 *
 * # Safety
 * `values` must point to `len` readable bytes; `inst` must be live; `out` writable.
 */
enum S2mStatus s2m_witness(const struct S2mInstance *inst,
                           const uint8_t *values,
                           size_t len,
                           struct S2mPlan **out);

/**
 * Monotone plan that exists for every formula; cost may exceed d*.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` writable.
 */
enum S2mStatus s2m_fallback_plan(const struct S2mInstance *inst, struct S2mPlan **out);

/**
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
enum S2mStatus s2m_plan_parse(const char *text, struct S2mPlan **out);

/**
 * # Safety
 * `plan` must be a live plan handle and `out` writable.
 */
enum S2mStatus s2m_plan_text(const struct S2mPlan *plan, char **out);

/**
 * # Safety
 * `plan` must be NULL or a live plan handle.
 */
void s2m_plan_free(struct S2mPlan *plan);

/**
 * # Safety
 * `inst` and `plan` must be live handles and `out` writable.
 */
enum S2mStatus s2m_validate(const struct S2mInstance *inst,
                            const struct S2mPlan *plan,
                            enum S2mMode mode,
                            struct S2mValidation *out);

/**
 * Is there a monotone plan of cost d*? Fails with `ORACLE` above `max_agents`.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` writable.
 */
enum S2mStatus s2m_oracle_monotone(const struct S2mInstance *inst,
                                   size_t max_agents,
                                   struct S2mOracleResult *out);

/**
 * Is there a sequential plan of cost d*? `seconds <= 0` means no time limit.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` writable.
 */
enum S2mStatus s2m_oracle_descending(const struct S2mInstance *inst,
                                     uint64_t max_states,
                                     double seconds,
                                     struct S2mOracleResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAT2MAPF_H */
