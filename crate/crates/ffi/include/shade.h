#ifndef SHADE_H
#define SHADE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible function.
 */
typedef enum ShadeStatus {
  SHADE_STATUS_OK = 0,
  SHADE_STATUS_NULL_POINTER = 1,
  SHADE_STATUS_INVALID_ARGUMENT = 2,
  SHADE_STATUS_SHAPE = 3,
  SHADE_STATUS_STATE = 4,
  SHADE_STATUS_FORMAT = 5,
  SHADE_STATUS_NUMERIC = 6,
  SHADE_STATUS_VERIFICATION = 7,
  SHADE_STATUS_IO = 8,
  SHADE_STATUS_JSON = 9,
  SHADE_STATUS_PANIC = 10,
} ShadeStatus;

/**
 * A neural network (opaque).
 */
typedef struct ShadeNetwork ShadeNetwork;

/**
 * SHADE moving averages and weights for one network (opaque).
 */
typedef struct ShadeRegularizer ShadeRegularizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *shade_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *shade_version(void);

/**
 * Per-unit penalty `sum_z p(z|y) (y - mu_z)^2`.
 */
double shade_unit_loss(double y, double mu0, double mu1);

/**
 * Derivative of [`shade_unit_loss`] with respect to `y`.
 */
double shade_unit_loss_derivative(double y, double mu0, double mu1);

/**
 * Creates a dense ReLU network `inputs -> hidden... -> classes` with
 * weights drawn from `seed`.
 *
 * # Safety
 * `hidden` must point to `n_hidden` values; `out` must be writable.
 */
enum ShadeStatus shade_network_new_mlp(size_t inputs,
                                       const size_t *hidden,
                                       size_t n_hidden,
                                       size_t classes,
                                       uint64_t seed,
                                       struct ShadeNetwork **out);

/**
 * Loads a checkpoint written by the `shade` command-line tool. Either
 * output may be null when not wanted.
 *
 * # Safety
 * `path` must be a NUL-terminated string; non-null outputs must be writable.
 */
enum ShadeStatus shade_checkpoint_load(const char *path,
                                       struct ShadeNetwork **network,
                                       struct ShadeRegularizer **regularizer);

/**
 * # Safety
 * `net` must come from this library (or be null) and not be used afterwards.
 */
void shade_network_free(struct ShadeNetwork *net);

/**
 * Number of input features per sample (product of the input shape).
 *
 * # Safety
 * `net` must be a valid handle or null (returns 0).
 */
size_t shade_network_input_len(const struct ShadeNetwork *net);

/**
 * # Safety
 * `net` must be a valid handle or null (returns 0).
 */
size_t shade_network_classes(const struct ShadeNetwork *net);

/**
 * Number of observed (regularized) hidden layers.
 *
 * # Safety
 * `net` must be a valid handle or null (returns 0).
 */
size_t shade_network_observed_layers(const struct ShadeNetwork *net);

/**
 * Evaluation-mode logits for `rows` row-major samples. `logits` must hold
 * `rows * classes` values.
 *
 * # Safety
 * `inputs` must hold `rows * input_len` values; `logits` must hold
 * `logits_len` writable values.
 */
enum ShadeStatus shade_network_predict(const struct ShadeNetwork *net,
                                       const double *inputs,
                                       size_t rows,
                                       double *logits,
                                       size_t logits_len);

/**
 * Fresh moving averages for every observed layer of `net`.
 *
 * # Safety
 * `net` must be a valid handle; `out` must be writable.
 */
enum ShadeStatus shade_regularizer_new(const struct ShadeNetwork *net,
                                       double decay,
                                       double beta,
                                       struct ShadeRegularizer **out);

/**
 * # Safety
 * `reg` must come from this library (or be null) and not be used afterwards.
 */
void shade_regularizer_free(struct ShadeRegularizer *reg);

/**
 * Runs `net` on a batch and folds its pre-activations into the moving averages.
 *
 * # Safety
 * Handles must be valid; `inputs` must hold `rows * input_len` values.
 */
enum ShadeStatus shade_regularizer_update(struct ShadeRegularizer *reg,
                                          const struct ShadeNetwork *net,
                                          const double *inputs,
                                          size_t rows);

/**
 * Penalty of a batch under the current moving averages (without `beta`).
 *
 * # Safety
 * Handles must be valid; `inputs` must hold `rows * input_len` values;
 * `loss` must be writable.
 */
enum ShadeStatus shade_regularizer_loss(const struct ShadeRegularizer *reg,
                                        const struct ShadeNetwork *net,
                                        const double *inputs,
                                        size_t rows,
                                        double *loss);

/**
 * Copies one unit's moving averages `(mu0, mu1, p0, p1)` into `out[0..4]`.
 *
 * # Safety
 * `reg` must be valid; `out` must hold 4 writable values.
 */
enum ShadeStatus shade_regularizer_unit(const struct ShadeRegularizer *reg,
                                        size_t layer,
                                        size_t unit,
                                        double *out);

/**
 * Runs one verification suite (`bounds`, `gradients`, `dpi`,
 * `reconstruction` or `algorithm1`). Returns `SHADE_STATUS_VERIFICATION`
 * when a check fails.
 *
 * # Safety
 * `scope` must be a NUL-terminated string.
 */
enum ShadeStatus shade_verify(const char *scope);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHADE_H */
