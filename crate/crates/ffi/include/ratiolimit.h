#ifndef RATIOLIMIT_H
#define RATIOLIMIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_UTF8 = 2,
  RL_STATUS_PARSE = 3,
  RL_STATUS_INVALID_ARGUMENT = 4,
  RL_STATUS_PERIODIC = 5,
  RL_STATUS_COVERAGE = 6,
  RL_STATUS_NOT_CONVERGED = 7,
  RL_STATUS_BUDGET = 8,
  RL_STATUS_DEPTH_EXCEEDED = 9,
  RL_STATUS_CONFIG = 10,
  RL_STATUS_IO = 11,
  RL_STATUS_OTHER = 12,
  RL_STATUS_PANIC = 13,
} RlStatus;

// A group descriptor.
typedef struct RlGroup RlGroup;

// A step measure with its convolution powers.
typedef struct RlWalk RlWalk;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *rl_last_error_message(void);

// Crate version as a static string.
const char *rl_version(void);

// Parses a JSON descriptor such as `{"family":"free","rank":2}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out_group` a valid pointer.
enum RlStatus rl_group_new(const char *json, struct RlGroup **out_group);

// # Safety
// `group` must come from [`rl_group_new`] or be null.
void rl_group_free(struct RlGroup *group);

// Number of elements of word length at most `radius`.
//
// # Safety
// `group` must be a live handle and `out_size` a valid pointer.
enum RlStatus rl_group_ball_size(const struct RlGroup *group, size_t radius, size_t *out_size);

// Builds convolution powers of a measure (measure-file text) up to `depth`.
//
// # Safety
// `group` must be a live handle, `measure` a NUL-terminated string and
// `out_walk` a valid pointer.
enum RlStatus rl_walk_new(const struct RlGroup *group,
                          const char *measure,
                          size_t depth,
                          struct RlWalk **out_walk);

// # Safety
// `walk` must come from [`rl_walk_new`] or be null.
void rl_walk_free(struct RlWalk *walk);

// `P^{(n)}_{x,y}`.
//
// # Safety
// `walk` must be a live handle, `x` and `y` NUL-terminated strings and
// `out_p` a valid pointer.
enum RlStatus rl_walk_transition(const struct RlWalk *walk,
                                 size_t n,
                                 const char *x,
                                 const char *y,
                                 double *out_p);

// Spectral radius estimate with its band.
//
// # Safety
// `walk` must be a live handle and the outputs valid pointers.
enum RlStatus rl_walk_spectral_radius(struct RlWalk *walk,
                                      double *out_rho,
                                      double *out_lo,
                                      double *out_hi);

// Accelerated ratio-limit kernel `Ĥ(x,y)` with its band.
//
// # Safety
// `walk` must be a live handle, `x` and `y` NUL-terminated strings and the
// outputs valid pointers.
enum RlStatus rl_walk_ratio_kernel(const struct RlWalk *walk,
                                   const char *x,
                                   const char *y,
                                   double *out_estimate,
                                   double *out_lo,
                                   double *out_hi);

// Closed-form `H(x,y)` for isotropic walks on `F_rank`.
//
// # Safety
// `x` and `y` must be NUL-terminated strings and `out_h` a valid pointer.
enum RlStatus rl_free_closed_form(size_t rank, const char *x, const char *y, double *out_h);

// Runs every job of a config into `out_dir`; `out_passed` is 1 when all
// reports passed.
//
// # Safety
// `config` and `out_dir` must be NUL-terminated strings and `out_passed` a
// valid pointer.
enum RlStatus rl_run_report(const char *config, const char *out_dir, int32_t *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RATIOLIMIT_H */
