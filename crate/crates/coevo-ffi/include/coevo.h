#ifndef COEVO_H
#define COEVO_H

/* Generated by cbindgen. Do not edit by hand; regenerate by building coevo-ffi. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define COEVO_OK 0

/**
 * A required pointer was null, not valid UTF-8, or otherwise unusable
 * before any parsing happened.
 */
#define COEVO_ERR_ARG 1

/**
 * Input text failed to parse.
 */
#define COEVO_ERR_PARSE 2

/**
 * Parsed input failed semantic validation.
 */
#define COEVO_ERR_VALIDATION 3

/**
 * The solver or evaluator rejected the inputs at run time.
 */
#define COEVO_ERR_SOLVE 4

/**
 * A panic or other internal failure.
 */
#define COEVO_ERR_INTERNAL 5

/**
 * Opaque problem-instance handle.
 */
typedef struct CoevoInstance CoevoInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *coevo_version(void);

/**
 * Message for the most recent failure on this thread, or null if the
 * last call succeeded. The pointer is owned by the library and is
 * invalidated by the next coevo call on the same thread. Do not free.
 */
const char *coevo_last_error(void);

/**
 * Releases a string previously returned through an out-pointer.
 *
 * # Safety
 * `s` must be null or a pointer obtained from a coevo out-parameter that
 * has not been freed yet.
 */
void coevo_string_free(char *s);

/**
 * Parses and validates an instance from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 * On success `*out` owns the instance until [`coevo_instance_free`].
 */
int coevo_instance_parse_json(const char *json, struct CoevoInstance **out);

/**
 * Samples an `n`-node instance from a generator program.
 *
 * `kind` is `"tsp"` or `"op"`. Sampling is deterministic in
 * `(generator_json, n, seed, kind)`.
 *
 * # Safety
 * `generator_json` and `kind` must be NUL-terminated strings; `out` must
 * be a valid pointer. On success `*out` owns the instance until
 * [`coevo_instance_free`].
 */
int coevo_instance_generate(const char *generator_json,
                            size_t n,
                            uint64_t seed,
                            const char *kind,
                            struct CoevoInstance **out);

/**
 * Serializes an instance back to JSON.
 *
 * # Safety
 * `instance` must be a live handle; `out_json` must be a valid pointer.
 * On success `*out_json` must be released with [`coevo_string_free`].
 */
int coevo_instance_to_json(const struct CoevoInstance *instance, char **out_json);

/**
 * Number of nodes in the instance.
 *
 * # Safety
 * `instance` must be a live handle; `out_n` must be a valid pointer.
 */
int coevo_instance_size(const struct CoevoInstance *instance, size_t *out_n);

/**
 * Releases an instance handle. Null is a no-op.
 *
 * # Safety
 * `instance` must be null or a handle from a coevo constructor that has
 * not been freed yet.
 */
void coevo_instance_free(struct CoevoInstance *instance);

/**
 * Runs the task's solver on an instance and returns the result as JSON
 * (best solution, objective, per-iteration trace, evaluation count).
 *
 * `task` is `"tsp_gls"`, `"tsp_aco"`, or `"op_aco"`. A null
 * `heuristic_json` selects the task's baseline guide. Zero for
 * `budget_ls_iters`, `stall_cycles`, or `iterations` keeps the default
 * budget. Deterministic in all arguments.
 *
 * # Safety
 * `task` must be a NUL-terminated string, `instance` a live handle,
 * `heuristic_json` null or a NUL-terminated string, and `out_json` a
 * valid pointer. On success `*out_json` must be released with
 * [`coevo_string_free`].
 */
int coevo_solve(const char *task,
                const struct CoevoInstance *instance,
                const char *heuristic_json,
                uint64_t seed,
                uint64_t budget_ls_iters,
                uint32_t stall_cycles,
                uint64_t iterations,
                char **out_json);

/**
 * Measures batch hardness of a generator against a heuristic and returns
 * the gap report as JSON. Instances are sampled with seeds
 * `seed..seed+batch-1`; the reference policy is the library default. A
 * null `heuristic_json` selects the task's baseline guide.
 *
 * # Safety
 * `task` and `generator_json` must be NUL-terminated strings,
 * `heuristic_json` null or a NUL-terminated string, and `out_json` a
 * valid pointer. On success `*out_json` must be released with
 * [`coevo_string_free`].
 */
int coevo_gap(const char *task,
              const char *generator_json,
              const char *heuristic_json,
              size_t n,
              size_t batch,
              uint64_t seed,
              char **out_json);

/**
 * Applies one random edit to a generator program and returns the mutated
 * program as JSON. The result always validates and always differs from
 * the input; deterministic in `(generator_json, seed)`.
 *
 * # Safety
 * `generator_json` must be a NUL-terminated string; `out_json` must be a
 * valid pointer. On success `*out_json` must be released with
 * [`coevo_string_free`].
 */
int coevo_mutate_generator(const char *generator_json, uint64_t seed, char **out_json);

/**
 * Applies one random edit to a heuristic program and returns the mutated
 * program as JSON. The result always validates and always differs from
 * the input; deterministic in `(heuristic_json, seed)`.
 *
 * # Safety
 * `heuristic_json` must be a NUL-terminated string; `out_json` must be a
 * valid pointer. On success `*out_json` must be released with
 * [`coevo_string_free`].
 */
int coevo_mutate_heuristic(const char *heuristic_json, uint64_t seed, char **out_json);

/**
 * Returns the task's baseline heuristic program as JSON.
 *
 * # Safety
 * `task` must be a NUL-terminated string; `out_json` must be a valid
 * pointer. On success `*out_json` must be released with
 * [`coevo_string_free`].
 */
int coevo_baseline_heuristic(const char *task, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COEVO_H */
