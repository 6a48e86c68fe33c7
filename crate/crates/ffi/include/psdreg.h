#ifndef PSDREG_H
#define PSDREG_H

/* Generated from the Rust sources by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an API call. The numeric values match the CLI exit codes
 * where a correspondence exists.
 */
typedef enum PsdregStatus {
  /**
   * The call succeeded.
   */
  PSDREG_STATUS_OK = 0,
  /**
   * Invalid configuration (bad sizes, ranks, or option values).
   */
  PSDREG_STATUS_CONFIG_ERROR = 2,
  /**
   * Invalid data (dimension mismatches, malformed files, i/o failures).
   */
  PSDREG_STATUS_DATA_ERROR = 3,
  /**
   * Numerical failure (divergence, exhausted line search, domain errors).
   */
  PSDREG_STATUS_NUMERICAL_ERROR = 4,
  /**
   * A required pointer argument was null.
   */
  PSDREG_STATUS_NULL_ARGUMENT = 5,
  /**
   * An internal invariant was violated; the handle state is unspecified.
   */
  PSDREG_STATUS_PANIC = 6,
} PsdregStatus;

/**
 * How a sample's prediction is compared against its target. Pass these
 * values as the `relation` argument of the sample-pushing functions.
 */
typedef enum PsdregRelation {
  /**
   * Squared error on the residual.
   */
  PSDREG_RELATION_EQUALITY = 0,
  /**
   * Penalized only when the prediction exceeds the target.
   */
  PSDREG_RELATION_UPPER_BOUND = 1,
  /**
   * Penalized only when the prediction falls below the target.
   */
  PSDREG_RELATION_LOWER_BOUND = 2,
} PsdregRelation;

/**
 * Opaque handle to a positive-semidefinite regression model.
 */
typedef struct PsdregModel PsdregModel;

/**
 * Opaque handle to a growable batch of training samples in a fixed
 * ambient dimension.
 */
typedef struct PsdregSamples PsdregSamples;

/**
 * Options for the batch (full-gradient, line-searched) optimizer.
 */
typedef struct PsdregBatchOptions {
  /**
   * Scale of the largest trial step: s_max = s0 / ||grad||.
   */
  double s0;
  /**
   * Sufficient-decrease constant of the line search, in (0, 1).
   */
  double c;
  /**
   * Tolerance shared by the stopping tests.
   */
  double eps_tol;
  /**
   * Cap on accepted gradient steps.
   */
  size_t max_iters;
} PsdregBatchOptions;

/**
 * Options for the online (mini-batch stochastic) optimizer.
 */
typedef struct PsdregOnlineOptions {
  /**
   * Full passes over the data.
   */
  size_t epochs;
  /**
   * Samples accumulated per update.
   */
  size_t batch_size;
  /**
   * Seed for shuffling and the step-size pre-training.
   */
  uint64_t seed;
} PsdregOnlineOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static string.
 */
const char *psdreg_version(void);

/**
 * Returns the message recorded by the most recent failing call on this
 * thread, or an empty string after a success. The pointer stays valid
 * until the next library call on the same thread and must not be freed.
 */
const char *psdreg_last_error(void);

/**
 * Fills `out` with the default batch-optimizer options.
 *
 * # Safety
 * `out` must be a valid pointer to writable memory for one value.
 */
enum PsdregStatus psdreg_batch_options_default(struct PsdregBatchOptions *out);

/**
 * Fills `out` with the default online-optimizer options.
 *
 * # Safety
 * `out` must be a valid pointer to writable memory for one value.
 */
enum PsdregStatus psdreg_online_options_default(struct PsdregOnlineOptions *out);

/**
 * Creates the identity-initialized model of the named geometry ("flat",
 * "polar", "cone-affine", or "cone-logeuclidean") with ambient dimension
 * `d` and rank `r`. The cone geometries require `r == d`.
 *
 * # Safety
 * `geometry` must be a valid NUL-terminated string and `out` a valid
 * pointer; on success `*out` owns the handle until `psdreg_model_free`.
 */
enum PsdregStatus psdreg_model_identity(const char *geometry,
                                        size_t d,
                                        size_t r,
                                        struct PsdregModel **out);

/**
 * Loads a model from a file written by `psdreg_model_save` (or by the CLI).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer;
 * on success `*out` owns the handle until `psdreg_model_free`.
 */
enum PsdregStatus psdreg_model_load(const char *path, struct PsdregModel **out);

/**
 * Writes the model to a file in the library's binary format.
 *
 * # Safety
 * `model` must be a live handle and `path` a valid NUL-terminated string.
 */
enum PsdregStatus psdreg_model_save(const struct PsdregModel *model, const char *path);

/**
 * Releases a model handle. Passing null is a no-op.
 *
 * # Safety
 * `model` must be null or a handle obtained from this library that has not
 * been freed already.
 */
void psdreg_model_free(struct PsdregModel *model);

/**
 * Ambient dimension of the model, or 0 if the handle is null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t psdreg_model_dim(const struct PsdregModel *model);

/**
 * Rank of the model, or 0 if the handle is null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t psdreg_model_rank(const struct PsdregModel *model);

/**
 * Name of the model's geometry as a static string, or an empty string if
 * the handle is null. The pointer must not be freed.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *psdreg_model_geometry(const struct PsdregModel *model);

/**
 * Writes the reconstructed matrix W row-major into `out`, which must hold
 * exactly d * d values.
 *
 * # Safety
 * `model` must be a live handle and `out` must point to `len` writable
 * doubles.
 */
enum PsdregStatus psdreg_model_reconstruct(const struct PsdregModel *model,
                                           double *out,
                                           size_t len);

/**
 * Predicts x' W x for a feature vector of the model's dimension.
 *
 * # Safety
 * `model` must be a live handle, `x` must point to `len` doubles, and
 * `out` must be a valid pointer.
 */
enum PsdregStatus psdreg_model_predict_rank_one(const struct PsdregModel *model,
                                                const double *x,
                                                size_t len,
                                                double *out);

/**
 * Predicts (e_i - e_j)' W (e_i - e_j), the squared distance between items
 * i and j when the model is a kernel over indexed items.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PsdregStatus psdreg_model_predict_pair(const struct PsdregModel *model,
                                            size_t i,
                                            size_t j,
                                            double *out);

/**
 * Creates an empty sample batch for observations of dimension `dim`.
 *
 * # Safety
 * `out` must be a valid pointer; on success `*out` owns the handle until
 * `psdreg_samples_free`.
 */
enum PsdregStatus psdreg_samples_new(size_t dim, struct PsdregSamples **out);

/**
 * Appends the observation (x x', target) under the given relation
 * (0 equality, 1 upper bound, 2 lower bound).
 *
 * # Safety
 * `samples` must be a live handle and `x` must point to `len` doubles.
 */
enum PsdregStatus psdreg_samples_push_rank_one(struct PsdregSamples *samples,
                                               const double *x,
                                               size_t len,
                                               double target,
                                               int relation);

/**
 * Appends the pair-difference observation between items i and j with the
 * given target and relation (0 equality, 1 upper bound, 2 lower bound).
 *
 * # Safety
 * `samples` must be a live handle.
 */
enum PsdregStatus psdreg_samples_push_pair(struct PsdregSamples *samples,
                                           size_t i,
                                           size_t j,
                                           double target,
                                           int relation);

/**
 * Number of samples currently in the batch, or 0 if the handle is null.
 *
 * # Safety
 * `samples` must be null or a live handle.
 */
size_t psdreg_samples_len(const struct PsdregSamples *samples);

/**
 * Releases a sample batch. Passing null is a no-op.
 *
 * # Safety
 * `samples` must be null or a handle obtained from this library that has
 * not been freed already.
 */
void psdreg_samples_free(struct PsdregSamples *samples);

/**
 * Mean of the per-sample losses of the model on the batch.
 *
 * # Safety
 * `model` and `samples` must be live handles and `out` a valid pointer.
 */
enum PsdregStatus psdreg_cost(const struct PsdregModel *model,
                              const struct PsdregSamples *samples,
                              double *out);

/**
 * Fits the model to the batch with full-gradient descent and an Armijo
 * line search. `options` may be null for defaults; `final_cost` may be
 * null. The input model is untouched; `*fitted` receives a new handle.
 *
 * # Safety
 * `model` and `samples` must be live handles, `fitted` a valid pointer,
 * and `options`/`final_cost` null or valid pointers.
 */
enum PsdregStatus psdreg_fit_batch(const struct PsdregModel *model,
                                   const struct PsdregSamples *samples,
                                   double lambda,
                                   const struct PsdregBatchOptions *options,
                                   struct PsdregModel **fitted,
                                   double *final_cost);

/**
 * Fits the model to the batch with mini-batch stochastic descent.
 * `options` may be null for defaults; `final_cost` may be null. The input
 * model is untouched; `*fitted` receives a new handle.
 *
 * # Safety
 * `model` and `samples` must be live handles, `fitted` a valid pointer,
 * and `options`/`final_cost` null or valid pointers.
 */
enum PsdregStatus psdreg_fit_online(const struct PsdregModel *model,
                                    const struct PsdregSamples *samples,
                                    double lambda,
                                    const struct PsdregOnlineOptions *options,
                                    struct PsdregModel **fitted,
                                    double *final_cost);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSDREG_H */
