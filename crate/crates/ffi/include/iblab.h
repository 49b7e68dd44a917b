#ifndef IBLAB_H
#define IBLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IblabStatus {
  IBLAB_STATUS_OK = 0,
  IBLAB_STATUS_NULL_POINTER = 1,
  IBLAB_STATUS_INVALID_ARGUMENT = 2,
  IBLAB_STATUS_VALIDATION = 3,
  IBLAB_STATUS_NUMERICAL = 4,
  IBLAB_STATUS_PANIC = 5,
} IblabStatus;

typedef enum IblabSurrogateKind {
  IBLAB_SURROGATE_KIND_IDENTITY = 0,
  IBLAB_SURROGATE_KIND_SQUARE = 1,
  IBLAB_SURROGATE_KIND_POWER = 2,
  IBLAB_SURROGATE_KIND_EXPONENTIAL = 3,
} IblabSurrogateKind;

/**
 * Opaque joint distribution p(x, y).
 */
typedef struct IblabJoint IblabJoint;

typedef struct IblabOptimizerConfig {
  double step_size;
  uint64_t max_iters;
  double grad_tolerance;
  uint64_t restarts;
  double init_scale;
  uint64_t seed;
} IblabOptimizerConfig;

typedef struct IblabInformation {
  double h_x;
  double h_y;
  double i_xy;
} IblabInformation;

/**
 * `parameter` is the exponent for `Power` and the scale for `Exponential`.
 */
typedef struct IblabSurrogate {
  enum IblabSurrogateKind kind;
  double parameter;
} IblabSurrogate;

typedef struct IblabPoint {
  double beta;
  double i_xt;
  double i_ty;
  double objective;
  bool converged;
  uint64_t restarts_used;
  uint64_t best_restart_seed;
} IblabPoint;

typedef struct IblabConsistencyReport {
  double gap;
  double epsilon;
  bool consistent;
  bool converged;
  double i_xt;
  double i_ty;
  double i_xsy;
  double i_st;
  double objective;
  double analytic_minimum;
  double h_x;
  double h_y;
  double i_xy;
  uint64_t card_t;
  uint64_t card_s;
} IblabConsistencyReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *iblab_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next library call on the same thread.
 */
const char *iblab_last_error(void);

/**
 * Releases a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void iblab_string_free(char *s);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IblabStatus iblab_optimizer_config_default(struct IblabOptimizerConfig *out);

/**
 * Defaults for the disentangled objective (more restarts).
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IblabStatus iblab_optimizer_config_disenib(struct IblabOptimizerConfig *out);

/**
 * Uniform x over `n` values with y = x mod k.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IblabStatus iblab_joint_deterministic(uint64_t n, uint64_t k, struct IblabJoint **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IblabStatus iblab_joint_noisy(uint64_t n, uint64_t k, double noise, struct IblabJoint **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IblabStatus iblab_joint_random(uint64_t n, uint64_t k, uint64_t seed, struct IblabJoint **out);

/**
 * Builds a joint from a row-major `n_x * n_y` array.
 *
 * # Safety
 * `probs` must point to `n_x * n_y` readable doubles; `out` must be valid
 * for writes.
 */
enum IblabStatus iblab_joint_from_probs(const double *probs,
                                        uint64_t n_x,
                                        uint64_t n_y,
                                        struct IblabJoint **out);

/**
 * Parses the JSON form `{"x_labels", "y_labels", "probs"}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum IblabStatus iblab_joint_from_json(const char *json, struct IblabJoint **out);

/**
 * Serializes a joint; free the result with [`iblab_string_free`].
 *
 * # Safety
 * `joint` must be a live handle; `out` must be valid for writes.
 */
enum IblabStatus iblab_joint_to_json(const struct IblabJoint *joint, char **out);

/**
 * Releases a joint. NULL is ignored.
 *
 * # Safety
 * `joint` must come from this library and not have been freed.
 */
void iblab_joint_free(struct IblabJoint *joint);

/**
 * # Safety
 * All pointers must be valid.
 */
enum IblabStatus iblab_joint_dims(const struct IblabJoint *joint, uint64_t *n_x, uint64_t *n_y);

/**
 * H(X), H(Y) and I(X;Y) in nats.
 *
 * # Safety
 * All pointers must be valid.
 */
enum IblabStatus iblab_joint_information(const struct IblabJoint *joint,
                                         struct IblabInformation *out);

/**
 * Solves the Lagrangian at one beta.
 *
 * # Safety
 * All pointers must be valid.
 */
enum IblabStatus iblab_optimize_at_beta(const struct IblabJoint *joint,
                                        double beta,
                                        struct IblabSurrogate surrogate,
                                        uint64_t card_t,
                                        const struct IblabOptimizerConfig *config,
                                        struct IblabPoint *out);

/**
 * Solves the Lagrangian at each of `count` ascending betas, writing
 * `count` points to `out`.
 *
 * # Safety
 * `betas` must hold `count` readable doubles and `out` room for `count`
 * points.
 */
enum IblabStatus iblab_sweep_beta(const struct IblabJoint *joint,
                                  const double *betas,
                                  uint64_t count,
                                  struct IblabSurrogate surrogate,
                                  uint64_t card_t,
                                  const struct IblabOptimizerConfig *config,
                                  struct IblabPoint *out);

/**
 * Bisects on beta in `[beta_lo, beta_hi]` for I(X;T) near `target`.
 * `reached` reports whether the tolerance was met; a bracket that does not
 * straddle the target yields [`IblabStatus::Numerical`].
 *
 * # Safety
 * All pointers must be valid.
 */
enum IblabStatus iblab_beta_at_compression(const struct IblabJoint *joint,
                                           double target,
                                           struct IblabSurrogate surrogate,
                                           uint64_t card_t,
                                           const struct IblabOptimizerConfig *config,
                                           double beta_lo,
                                           double beta_hi,
                                           struct IblabPoint *out,
                                           bool *reached);

/**
 * Optimizes the disentangled objective. Zero cardinalities select the
 * defaults (|T| = |Y|, |S| = largest class).
 *
 * # Safety
 * All pointers must be valid.
 */
enum IblabStatus iblab_optimize_disenib(const struct IblabJoint *joint,
                                        uint64_t card_t,
                                        uint64_t card_s,
                                        const struct IblabOptimizerConfig *config,
                                        double epsilon,
                                        struct IblabConsistencyReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IBLAB_H */
