#ifndef ADVEXP_H
#define ADVEXP_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdvStatus {
  ADV_STATUS_OK = 0,
  ADV_STATUS_NULL_POINTER = 1,
  ADV_STATUS_INVALID_ARGUMENT = 2,
  ADV_STATUS_SHAPE = 3,
  ADV_STATUS_PAST_HORIZON = 4,
  ADV_STATUS_IO = 5,
  ADV_STATUS_FORMAT = 6,
  /**
   * The trial ran but a component failed; its partial log was written.
   */
  ADV_STATUS_TRIAL_FAILED = 7,
  ADV_STATUS_INTERNAL = 8,
} AdvStatus;

/**
 * Environment instance with its own state and reset stream.
 */
typedef struct AdvEnv AdvEnv;

/**
 * Inverse dynamics model with its recurrent state.
 */
typedef struct AdvModel AdvModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *adv_last_error(void);

/**
 * `−|loss − delta|`.
 */
double adv_shape_reward(double loss, double delta);

/**
 * Creates an environment by name (`point_reach`, `arm_reach`,
 * `push_block`, `chain_reach`) and resets it.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AdvStatus adv_env_new(const char *name, uint64_t seed, struct AdvEnv **out);

/**
 * # Safety
 * `env` must come from [`adv_env_new`] and not be used afterwards.
 */
void adv_env_free(struct AdvEnv *env);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t adv_env_state_dim(const struct AdvEnv *env);

/**
 * Action dimension, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t adv_env_action_dim(const struct AdvEnv *env);

/**
 * Episode length, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t adv_env_horizon(const struct AdvEnv *env);

/**
 * Starts a new episode and writes its first state.
 *
 * # Safety
 * `env` must be live; `state_out` must hold `state_len` doubles.
 */
enum AdvStatus adv_env_reset(struct AdvEnv *env, double *state_out, size_t state_len);

/**
 * Copies the current state.
 *
 * # Safety
 * `env` must be live; `state_out` must hold `state_len` doubles.
 */
enum AdvStatus adv_env_state(const struct AdvEnv *env, double *state_out, size_t state_len);

/**
 * Applies one action (clamped to `[-1, 1]`), writes the new state and
 * whether the episode has reached its horizon.
 *
 * # Safety
 * `env` must be live; `action` must hold `action_len` doubles,
 * `state_out` `state_len` doubles; `done` may be null.
 */
enum AdvStatus adv_env_step(struct AdvEnv *env,
                            const double *action,
                            size_t action_len,
                            double *state_out,
                            size_t state_len,
                            bool *done);

/**
 * Task-coordinate distance to the goal for the current state.
 *
 * # Safety
 * `env` must be live and `out` writable.
 */
enum AdvStatus adv_env_goal_distance(const struct AdvEnv *env, double *out);

/**
 * Loads an inverse model checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AdvStatus adv_model_load(const char *path, struct AdvModel **out);

/**
 * # Safety
 * `model` must come from [`adv_model_load`] and not be used afterwards.
 */
void adv_model_free(struct AdvModel *model);

/**
 * Clears the recurrent state; call at every episode start.
 *
 * # Safety
 * `model` must be live.
 */
enum AdvStatus adv_model_reset(struct AdvModel *model);

/**
 * Predicts the action taking `x` to `x_next` and advances the recurrent
 * state.
 *
 * # Safety
 * `model` must be live; `x` and `x_next` must hold `state_len` doubles and
 * `action_out` `action_len` doubles.
 */
enum AdvStatus adv_model_predict(struct AdvModel *model,
                                 const double *x,
                                 const double *x_next,
                                 size_t state_len,
                                 double *action_out,
                                 size_t action_len);

/**
 * Runs one trial from a JSON config and writes its files into `out_dir`.
 * Writes the final success rate to `final_success` when non-null.
 *
 * # Safety
 * `config_json` and `out_dir` must be NUL-terminated strings.
 */
enum AdvStatus adv_run_trial_json(const char *config_json,
                                  const char *out_dir,
                                  double *final_success);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADVEXP_H */
