#ifndef PERCEPTRON_LAB_H
#define PERCEPTRON_LAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlEstimatorMethod {
  PL_ESTIMATOR_METHOD_DIRECT_GAUSSIAN = 0,
  PL_ESTIMATOR_METHOD_SEQUENTIAL_CONDITIONING = 1,
} PlEstimatorMethod;

/**
 * Result codes.
 */
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_DOMAIN = 2,
  PL_STATUS_NON_CONVERGENCE = 3,
  PL_STATUS_DIMENSION = 4,
  PL_STATUS_BUFFER_TOO_SMALL = 5,
  PL_STATUS_PANIC = 6,
} PlStatus;

/**
 * Disorder matrix handle.
 */
typedef struct PlInstance PlInstance;

/**
 * Quadrature configuration handle.
 */
typedef struct PlQuadSpec PlQuadSpec;

/**
 * Minimum of `GD(alpha, .)` over the overlap.
 */
typedef struct PlGdEvaluation {
  double alpha;
  double q_star;
  double value;
  double margin_vs_log2;
  bool boundary_minimum;
} PlGdEvaluation;

/**
 * Conditional first-moment certificate; `rate = log2_term + free_energy_term + slack_epsilon`.
 */
typedef struct PlBoundCertificate {
  double alpha;
  double rate;
  double log2_term;
  double free_energy_term;
  double slack_epsilon;
  double q_star;
  bool bound_holds;
} PlBoundCertificate;

/**
 * Spherical free-energy estimate in nats per dimension.
 */
typedef struct PlSphericalEstimate {
  double f_hat;
  double std_error;
  uint64_t samples;
  enum PlEstimatorMethod method;
  bool truncated;
} PlSphericalEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the calling thread's last failure, or NULL if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *pl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pl_version(void);

/**
 * `P(Z >= x)`.
 */
double pl_gauss_tail(double x);

/**
 * `ln P(Z >= x)`, finite for all finite `x`.
 */
double pl_log_gauss_tail(double x);

/**
 * `P(Z >= x) / phi(x)`.
 */
double pl_mills_ratio(double x);

/**
 * Default quadrature: Gauss-Hermite, 400 nodes, tolerance 1e-10.
 */
struct PlQuadSpec *pl_quad_spec_default(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum PlStatus pl_quad_spec_gauss_hermite(size_t node_count,
                                         double abs_tol,
                                         struct PlQuadSpec **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum PlStatus pl_quad_spec_adaptive(double half_width, double abs_tol, struct PlQuadSpec **out);

/**
 * # Safety
 * `spec` must be NULL or a handle from a `pl_quad_spec_*` constructor that
 * has not been freed.
 */
void pl_quad_spec_free(struct PlQuadSpec *spec);

/**
 * `GD(alpha, q)` in nats.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for writes.
 */
enum PlStatus pl_gd_at(const struct PlQuadSpec *spec, double alpha, double q, double *out);

/**
 * # Safety
 * `spec` must be a live handle and `out` valid for writes.
 */
enum PlStatus pl_gd_min(const struct PlQuadSpec *spec,
                        double alpha,
                        double opt_tol,
                        struct PlGdEvaluation *out);

/**
 * Root of `GD(alpha) + ln 2`.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for writes.
 */
enum PlStatus pl_critical_alpha(const struct PlQuadSpec *spec, double root_tol, double *out);

/**
 * # Safety
 * `spec` must be a live handle and `out` valid for writes.
 */
enum PlStatus pl_conditional_rate(const struct PlQuadSpec *spec,
                                  double alpha,
                                  double slack_epsilon,
                                  struct PlBoundCertificate *out);

/**
 * # Safety
 * `spec` must be a live handle and `out` valid for writes.
 */
enum PlStatus pl_capacity_upper_bound(const struct PlQuadSpec *spec,
                                      double slack_epsilon,
                                      double root_tol,
                                      double *out);

/**
 * Samples an `n_constraints x n_dim` standard Gaussian matrix.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PlStatus pl_instance_sample(size_t n_dim,
                                 size_t n_constraints,
                                 uint64_t seed,
                                 struct PlInstance **out);

/**
 * Copies a row-major `rows x n_dim` matrix.
 *
 * # Safety
 * `matrix` must point to `rows * n_dim` readable doubles (or may be NULL
 * when `rows` is 0) and `out` must be valid for writes.
 */
enum PlStatus pl_instance_from_matrix(size_t n_dim,
                                      size_t rows,
                                      const double *matrix,
                                      uint64_t seed,
                                      struct PlInstance **out);

/**
 * # Safety
 * `instance` must be NULL or a live handle.
 */
void pl_instance_free(struct PlInstance *instance);

/**
 * Dimension `N`, or 0 for NULL.
 *
 * # Safety
 * `instance` must be NULL or a live handle.
 */
size_t pl_instance_n_dim(const struct PlInstance *instance);

/**
 * Number of rows `M`, or 0 for NULL.
 *
 * # Safety
 * `instance` must be NULL or a live handle.
 */
size_t pl_instance_n_constraints(const struct PlInstance *instance);

/**
 * Exact counts `|Z_t|` for `t = 0..=M` into `counts`, which must hold at
 * least `M + 1` entries. `written` receives `M + 1`, also when the buffer
 * is too small.
 *
 * # Safety
 * `instance` must be a live handle, `counts` valid for `len` writes and
 * `written` valid for writes or NULL.
 */
enum PlStatus pl_instance_count_solutions(const struct PlInstance *instance,
                                          uint64_t *counts,
                                          size_t len,
                                          size_t *written);

/**
 * # Safety
 * `instance` must be a live handle and `out` valid for writes.
 */
enum PlStatus pl_instance_estimate_f_direct(const struct PlInstance *instance,
                                            uint64_t samples,
                                            uint64_t seed,
                                            struct PlSphericalEstimate *out);

/**
 * # Safety
 * `instance` must be a live handle and `out` valid for writes.
 */
enum PlStatus pl_instance_estimate_f_sequential(const struct PlInstance *instance,
                                                uint64_t samples_per_step,
                                                uint64_t seed,
                                                struct PlSphericalEstimate *out);

/**
 * Perceptron search for a unit `sigma` with `A sigma > 0`. On success
 * `found` is true and `sigma` (length `N`) holds the witness; otherwise the
 * result is inconclusive and `sigma` is untouched.
 *
 * # Safety
 * `instance` must be a live handle, `sigma` valid for `len` writes and
 * `found` valid for writes.
 */
enum PlStatus pl_instance_feasibility(const struct PlInstance *instance,
                                      uint64_t max_iters,
                                      double *sigma,
                                      size_t len,
                                      bool *found);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERCEPTRON_LAB_H */
