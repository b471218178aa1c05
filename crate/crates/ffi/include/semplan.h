#ifndef SEMPLAN_H
#define SEMPLAN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SEMPLAN_STATUS_OK = 0,
  SEMPLAN_STATUS_NULL_ARGUMENT = 1,
  SEMPLAN_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or an unknown task or skill name.
   */
  SEMPLAN_STATUS_PARSE = 3,
  SEMPLAN_STATUS_CONTRACT = 4,
  SEMPLAN_STATUS_PRECONDITION = 5,
  SEMPLAN_STATUS_CAPACITY = 6,
  SEMPLAN_STATUS_DOMAIN = 7,
  SEMPLAN_STATUS_TRAINING = 8,
  SEMPLAN_STATUS_EXPANSION = 9,
  SEMPLAN_STATUS_CONFIG = 10,
  SEMPLAN_STATUS_CHECKPOINT = 11,
  SEMPLAN_STATUS_IO = 12,
  /**
   * A Rust panic was caught at the boundary.
   */
  SEMPLAN_STATUS_INTERNAL = 13,
} SemplanStatus;

/**
 * One trained skill-effect model.
 */
typedef struct SemplanModel SemplanModel;

/**
 * A skill library together with the backend that predicts its effects.
 */
typedef struct SemplanPlanner SemplanPlanner;

/**
 * A geometry and the block state inside it.
 */
typedef struct SemplanWorld SemplanWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; never free it.
 */
const char *semplan_version(void);

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *semplan_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void semplan_string_free(char *s);

/**
 * Samples a start state with `counts[c]` blocks of color `c` in the default
 * geometry.
 *
 * # Safety
 * `counts` must point to `n_colors` values; `out` must be writable.
 */
SemplanStatus semplan_world_sample(const size_t *counts,
                                   size_t n_colors,
                                   uint64_t seed,
                                   SemplanWorld **out);

/**
 * Builds a world from a JSON state: a list of `[x, y, z, color, index]` rows.
 *
 * # Safety
 * `state_json` must be a valid C string; `out` must be writable.
 */
SemplanStatus semplan_world_from_json(const char *state_json, SemplanWorld **out);

/**
 * # Safety
 * `world` must be a live handle; `out` must be writable.
 */
SemplanStatus semplan_world_block_count(const SemplanWorld *world, size_t *out);

/**
 * The state as JSON; free the string with [`semplan_string_free`].
 *
 * # Safety
 * `world` must be a live handle; `out` must be writable.
 */
SemplanStatus semplan_world_to_json(const SemplanWorld *world, char **out);

/**
 * Executes one skill in place and reports its cost. Skill parameters are
 * JSON such as `{"type":"tray_slide","bin_x":0.5}`. The state is unchanged on
 * failure.
 *
 * # Safety
 * `world` must be a live handle, `params_json` a valid C string and
 * `cost` writable.
 */
SemplanStatus semplan_world_apply(SemplanWorld *world, const char *params_json, double *cost);

/**
 * # Safety
 * `world` must be null or a handle from this library, freed once.
 */
void semplan_world_free(SemplanWorld *world);

/**
 * Loads a model checkpoint.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
SemplanStatus semplan_model_load(const char *path, SemplanModel **out);

/**
 * Predicts the effect of one skill call: writes a new world handle and the
 * predicted cost.
 *
 * # Safety
 * Handles must be live, `params_json` a valid C string, outputs writable.
 */
SemplanStatus semplan_model_predict(const SemplanModel *model,
                                    const SemplanWorld *world,
                                    const char *params_json,
                                    SemplanWorld **out_world,
                                    double *out_cost);

/**
 * # Safety
 * `model` must be null or a handle from this library, freed once.
 */
void semplan_model_free(SemplanModel *model);

/**
 * A planner over a comma-separated skill list such as `"pick_place,tray_slide"`.
 * With `models_dir` null it plans with the exact simulator; otherwise it
 * loads `<models_dir>/<skill>.json` for every skill.
 *
 * # Safety
 * `skills` must be a valid C string, `models_dir` null or a valid C string
 * and `out` writable.
 */
SemplanStatus semplan_planner_new(const char *skills, const char *models_dir, SemplanPlanner **out);

/**
 * Plans task `task` ("A" to "D") from the world's state with default search
 * settings and writes a JSON report holding the outcome, the plan and its
 * executed result. Finding no plan is not an error.
 *
 * # Safety
 * Handles must be live, `task` a valid C string and `out_json` writable.
 */
SemplanStatus semplan_planner_plan(const SemplanPlanner *planner,
                                   const SemplanWorld *world,
                                   const char *task,
                                   uint64_t seed,
                                   char **out_json);

/**
 * # Safety
 * `planner` must be null or a handle from this library, freed once.
 */
void semplan_planner_free(SemplanPlanner *planner);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMPLAN_H */
