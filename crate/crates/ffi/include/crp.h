#ifndef CRP_H
#define CRP_H

/* Generated by cbindgen from crp-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  CRP_STATUS_OK = 0,
  CRP_STATUS_NULL_POINTER = 1,
  CRP_STATUS_INVALID_UTF8 = 2,
  CRP_STATUS_PARSE_ERROR = 3,
  CRP_STATUS_BAD_ARGUMENT = 4,
  CRP_STATUS_INFEASIBLE = 5,
} CrpStatus;

/**
 * Relocation scheme selector.
 */
typedef enum {
  CRP_SCHEME_RESTRICTED = 0,
  CRP_SCHEME_UNRESTRICTED = 1,
} CrpScheme;

/**
 * Opaque benchmark instance handle.
 */
typedef struct CrpInstance CrpInstance;

/**
 * Opaque priority rule handle.
 */
typedef struct CrpRule CrpRule;

/**
 * Energy rates; mirror of the core defaults when obtained from
 * [`crp_default_energy_params`].
 */
typedef struct {
  double hoist_per_tier;
  double lower_per_tier;
  double cross_per_stack;
  double crane_weight;
} CrpEnergyParams;

/**
 * Crane travel conventions.
 */
typedef struct {
  bool count_empty_moves;
  uintptr_t truck_tier;
  uintptr_t initial_crane_stack;
  uintptr_t initial_crane_tier;
} CrpKinematics;

/**
 * Outcome of one solved episode.
 */
typedef struct {
  double total_energy;
  uint64_t moves;
  uint64_t relocations;
  uint64_t retrievals;
} CrpSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *crp_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *crp_version(void);

/**
 * Parse an instance from text, sniffing the format: native (`instance`
 * header), Zhu (3-integer header), or Caserta (2-integer header). On
 * success `*out` owns a new handle.
 *
 * # Safety
 * `text` must be a valid nul-terminated string and `out` a valid pointer.
 */
CrpStatus crp_instance_parse(const char *text, CrpInstance **out);

/**
 * Attach seeded uniform container weights (see the format docs for the
 * exact generator). Fails if weights are already present.
 *
 * # Safety
 * `instance` must be a live handle from `crp_instance_parse`.
 */
CrpStatus crp_instance_attach_weights(CrpInstance *instance, uint64_t seed);

/**
 * Number of containers in the instance.
 *
 * # Safety
 * `instance` must be a live handle (null returns 0).
 */
uint64_t crp_instance_container_count(const CrpInstance *instance);

/**
 * Number of stacks in the instance.
 *
 * # Safety
 * `instance` must be a live handle (null returns 0).
 */
uint64_t crp_instance_stack_count(const CrpInstance *instance);

/**
 * Release an instance handle. Null is a no-op.
 *
 * # Safety
 * `instance` must have come from `crp_instance_parse` and not been freed.
 */
void crp_instance_free(CrpInstance *instance);

/**
 * The lowest-stack (TLP) baseline rule.
 */
CrpRule *crp_rule_tlp(void);

/**
 * The reshuffle-index (RI) baseline rule.
 */
CrpRule *crp_rule_ri(void);

/**
 * A GRH rule from its 12 parameters (each in [0, 1], in the order alpha,
 * beta, gamma, p1, delta, p2, epsilon, p3, eta, theta, p4, mu).
 *
 * # Safety
 * `genes` must point to 12 readable doubles; `out` must be valid.
 */
CrpStatus crp_rule_grh(const double *genes, CrpRule **out);

/**
 * An evolved rule from its s-expression, e.g. `(add (mul n_s r_s) k_s)`.
 *
 * # Safety
 * `text` must be a valid nul-terminated string and `out` a valid pointer.
 */
CrpStatus crp_rule_parse_tree(const char *text, CrpRule **out);

/**
 * Release a rule handle. Null is a no-op.
 *
 * # Safety
 * `rule` must have come from a `crp_rule_*` constructor and not been freed.
 */
void crp_rule_free(CrpRule *rule);

/**
 * Default energy rates (0.9 / 0.02 / 0.08 per ton, crane 0.5 t).
 */
CrpEnergyParams crp_default_energy_params(void);

/**
 * Default crane travel convention (count empty moves, truck tier 1, crane
 * starting at the truck).
 */
CrpKinematics crp_default_kinematics(void);

/**
 * Run one full retrieval episode of `rule` over `instance` and fill
 * `result` with the move counts and total energy consumed. `energy` and
 * `kinematics` may be null to use the defaults. The instance must carry
 * container weights (parse them or call `crp_instance_attach_weights`).
 *
 * # Safety
 * `instance` and `rule` must be live handles; `result` must be a valid
 * pointer; `energy`/`kinematics`, when non-null, must point to readable
 * structs.
 */
CrpStatus crp_solve(const CrpInstance *instance,
                    const CrpRule *rule,
                    CrpScheme scheme,
                    const CrpEnergyParams *energy,
                    const CrpKinematics *kinematics,
                    CrpSolveResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRP_H */
