#ifndef CONDTEST_H
#define CONDTEST_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_INPUT = 1,
  CT_STATUS_PARAMETER = 2,
  CT_STATUS_MISUSE = 3,
  CT_STATUS_NUMERICAL = 4,
  CT_STATUS_CALIBRATION = 5,
  CT_STATUS_NULL_POINTER = 6,
  CT_STATUS_PANIC = 7,
} CtStatus;

typedef enum CtKernelFamily {
  CT_KERNEL_FAMILY_GAUSSIAN = 0,
  CT_KERNEL_FAMILY_LINEAR_INHOMOGENEOUS = 1,
  CT_KERNEL_FAMILY_POLYNOMIAL_INHOMOGENEOUS = 2,
} CtKernelFamily;

typedef enum CtBootstrap {
  CT_BOOTSTRAP_NAIVE = 0,
  CT_BOOTSTRAP_WILD = 1,
  CT_BOOTSTRAP_WILD_STUDENTIZED = 2,
} CtBootstrap;

/**
 * Opaque set of transition pairs.
 */
typedef struct CtDataSet CtDataSet;

/**
 * Opaque fitted KRR model.
 */
typedef struct CtModel CtModel;

/**
 * Kernel description. `param` is the bandwidth γ² for the Gaussian family
 * and the offset c otherwise; `degree` is read for polynomials only.
 */
typedef struct CtKernel {
  enum CtKernelFamily family;
  double param;
  uint32_t degree;
} CtKernel;

/**
 * Noise and norm assumptions for the analytical thresholds.
 */
typedef struct CtThresholdParams {
  double s;
  double rho;
  double trace_rv;
  double trace_rg;
  double hs_rg;
  double op_rg;
  double delta;
} CtThresholdParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The string is
 * owned by the library and valid until the next call on this thread.
 */
const char *ct_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ct_version(void);

/**
 * Copies `n` pairs with covariates `x` (`n × dx`) and measurements `z`
 * (`n × dz`) into a new data set.
 *
 * # Safety
 * `x` and `z` must point to `n·dx` and `n·dz` readable doubles; `out` must
 * be writable.
 */
enum CtStatus ct_dataset_new(const double *x,
                             const double *z,
                             size_t n,
                             size_t dx,
                             size_t dz,
                             struct CtDataSet **out);

/**
 * Number of pairs, or 0 for a null handle.
 *
 * # Safety
 * `data` must be null or a live handle from [`ct_dataset_new`].
 */
size_t ct_dataset_len(const struct CtDataSet *data);

/**
 * # Safety
 * `data` must be null or a handle from [`ct_dataset_new`] not yet freed.
 */
void ct_dataset_free(struct CtDataSet *data);

/**
 * Fits KRR with input kernel `k`, regularization `lambda` and output
 * kernel `kappa`.
 *
 * # Safety
 * `data` must be a live data set handle and `out` writable.
 */
enum CtStatus ct_model_fit(const struct CtDataSet *data,
                           struct CtKernel k,
                           double lambda,
                           struct CtKernel kappa,
                           struct CtModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`ct_model_fit`] not yet freed.
 */
void ct_model_free(struct CtModel *model);

/**
 * Scalar prediction at `x`; the model must have 1-d measurements.
 *
 * # Safety
 * `x` must point to `dim` doubles and `out` be writable.
 */
enum CtStatus ct_model_predict_scalar(const struct CtModel *model,
                                      const double *x,
                                      size_t dim,
                                      double *out);

/**
 * Posterior scale σ(x).
 *
 * # Safety
 * `x` must point to `dim` doubles and `out` be writable.
 */
enum CtStatus ct_model_posterior_scale(const struct CtModel *model,
                                       const double *x,
                                       size_t dim,
                                       double *out);

/**
 * Conditional MMD between two models at `x`.
 *
 * # Safety
 * Both handles must be live, `x` must point to `dim` doubles and `out` be
 * writable.
 */
enum CtStatus ct_cmmd(const struct CtModel *first,
                      const struct CtModel *second,
                      const double *x,
                      size_t dim,
                      double *out);

/**
 * Analytical multiplier for online sampling.
 *
 * # Safety
 * `data` must be a live handle and `out` writable.
 */
enum CtStatus ct_beta_online(struct CtThresholdParams params,
                             const struct CtDataSet *data,
                             struct CtKernel k,
                             double lambda,
                             double *out);

/**
 * Analytical multiplier for independent pairs.
 *
 * # Safety
 * `data` must be a live handle and `out` writable.
 */
enum CtStatus ct_beta_fixed(struct CtThresholdParams params,
                            const struct CtDataSet *data,
                            struct CtKernel k,
                            double lambda,
                            double *out);

/**
 * Bootstrapped multiplier at the quantile `1 − alpha/2` over the data
 * set's own covariates. `factorizations` may be null.
 *
 * # Safety
 * `data` must be a live handle, `beta` writable, `factorizations` null or
 * writable.
 */
enum CtStatus ct_calibrate(const struct CtDataSet *data,
                           struct CtKernel k,
                           struct CtKernel kappa,
                           double lambda,
                           enum CtBootstrap method_,
                           size_t replicates,
                           double alpha,
                           uint64_t seed,
                           double *beta,
                           size_t *factorizations);

/**
 * Tests at `n` covariates `xs` (`n × dim`) with multipliers `beta1`,
 * `beta2`. Writes 1 or 0 per covariate into `reject`, the ratio
 * statistic/threshold into `ratio` (may be null) and the number of
 * rejections into `rejections`.
 *
 * # Safety
 * Handles must be live; `xs` must hold `n·dim` doubles, `reject` `n`
 * bytes, `ratio` null or `n` doubles, `rejections` be writable.
 */
enum CtStatus ct_run_test(const struct CtModel *first,
                          const struct CtModel *second,
                          double beta1,
                          double beta2,
                          const double *xs,
                          size_t n,
                          size_t dim,
                          uint8_t *reject,
                          double *ratio,
                          size_t *rejections);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONDTEST_H */
