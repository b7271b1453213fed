#ifndef SVM_ASYM_H
#define SVM_ASYM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SvmAsymStatus {
  SVM_ASYM_STATUS_OK = 0,
  SVM_ASYM_STATUS_NULL_POINTER = 1,
  SVM_ASYM_STATUS_INVALID_ARGUMENT = 2,
  SVM_ASYM_STATUS_INVALID_MODEL = 3,
  SVM_ASYM_STATUS_NO_SOLUTION = 4,
  SVM_ASYM_STATUS_DIVERGED = 5,
  SVM_ASYM_STATUS_NOT_CONVERGED = 6,
  SVM_ASYM_STATUS_DIMENSION_MISMATCH = 7,
  SVM_ASYM_STATUS_FORMAT = 8,
  SVM_ASYM_STATUS_IO = 9,
  SVM_ASYM_STATUS_PANIC = 10,
} SvmAsymStatus;

// Which predicted curve [`svm_asym_theory_curve`] evaluates.
typedef enum SvmAsymCurve {
  // CDF of a centered coefficient.
  SVM_ASYM_CURVE_COEF_CDF = 0,
  // CDF of a training margin, including the atom at 1.
  SVM_ASYM_CURVE_MARGIN_CDF = 1,
  // Density of `alpha* V + sigma* Z`.
  SVM_ASYM_CURVE_DENSITY = 2,
} SvmAsymCurve;

// Which per-index vector [`svm_asym_fit_copy`] copies.
typedef enum SvmAsymFitVector {
  // Length `p`.
  SVM_ASYM_FIT_VECTOR_COEFFICIENTS = 0,
  // Length `n`.
  SVM_ASYM_FIT_VECTOR_MARGINS = 1,
  // Length `n`.
  SVM_ASYM_FIT_VECTOR_DUALS = 2,
} SvmAsymFitVector;

// A labelled sample.
typedef struct SvmAsymDataset SvmAsymDataset;

// A fitted SVM.
typedef struct SvmAsymFit SvmAsymFit;

// Limiting predictions for one model.
typedef struct SvmAsymTheory SvmAsymTheory;

typedef struct SvmAsymTheoryValues {
  double alpha;
  double gamma;
  double sigma;
  double support_fraction;
  double objective;
  double misclassification;
} SvmAsymTheoryValues;

typedef struct SvmAsymFitSummary {
  double primal_objective;
  double dual_objective;
  double gap;
  double kkt_violation;
  uintptr_t epochs;
  bool converged;
} SvmAsymFitSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread. Valid until the next
// call into the library from the same thread.
const char *svm_asym_last_error(void);

const char *svm_asym_version(void);

// # Safety
// `out` must be writable.
enum SvmAsymStatus svm_asym_std_normal_cdf(double x, double *out);

// # Safety
// `out` must be writable.
enum SvmAsymStatus svm_asym_prox_margin(double m, double gamma, double *out);

// Solve the limiting equations for `model` (`"null"`, `"logistic:<c>"` or
// `"indicator"`).
//
// # Safety
// `model` must be a NUL-terminated string and `out` writable.
enum SvmAsymStatus svm_asym_theory_solve(const char *model,
                                         double delta,
                                         double lambda,
                                         struct SvmAsymTheory **out);

// # Safety
// `theory` must be NULL or a handle from [`svm_asym_theory_solve`] not yet freed.
void svm_asym_theory_free(struct SvmAsymTheory *theory);

// # Safety
// `theory` must be a live handle and `out` writable.
enum SvmAsymStatus svm_asym_theory_values(const struct SvmAsymTheory *theory,
                                          struct SvmAsymTheoryValues *out);

// Evaluate a predicted curve at `len` points.
//
// # Safety
// `theory` must be a live handle; `x` and `out` must hold `len` doubles.
enum SvmAsymStatus svm_asym_theory_curve(const struct SvmAsymTheory *theory,
                                         enum SvmAsymCurve curve,
                                         const double *x,
                                         uintptr_t len,
                                         double *out);

// # Safety
// `model` must be a NUL-terminated string and `out` writable.
enum SvmAsymStatus svm_asym_dataset_generate(const char *model,
                                             uintptr_t n,
                                             uintptr_t p,
                                             uint64_t seed,
                                             struct SvmAsymDataset **out);

// Load a dataset file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum SvmAsymStatus svm_asym_dataset_load(const char *path, struct SvmAsymDataset **out);

// # Safety
// `data` must be a live handle and `path` a NUL-terminated string.
enum SvmAsymStatus svm_asym_dataset_save(const struct SvmAsymDataset *data, const char *path);

// # Safety
// `data` must be a live handle; `n` and `p` writable.
enum SvmAsymStatus svm_asym_dataset_dims(const struct SvmAsymDataset *data,
                                         uintptr_t *n,
                                         uintptr_t *p);

// # Safety
// `data` must be NULL or a live handle.
void svm_asym_dataset_free(struct SvmAsymDataset *data);

// Fit the hinge + ridge SVM. A fit that runs out of epochs is still
// returned, together with [`SvmAsymStatus::NotConverged`].
//
// # Safety
// `data` must be a live handle and `out` writable.
enum SvmAsymStatus svm_asym_fit(const struct SvmAsymDataset *data,
                                double lambda,
                                double tol,
                                uintptr_t max_epochs,
                                struct SvmAsymFit **out);

// # Safety
// `fit` must be NULL or a live handle.
void svm_asym_fit_free(struct SvmAsymFit *fit);

// # Safety
// `fit` must be a live handle and `out` writable.
enum SvmAsymStatus svm_asym_fit_summary(const struct SvmAsymFit *fit,
                                        struct SvmAsymFitSummary *out);

// Copy a vector of the fit into `out`, which must hold exactly its length.
//
// # Safety
// `fit` must be a live handle and `out` must hold `len` doubles.
enum SvmAsymStatus svm_asym_fit_copy(const struct SvmAsymFit *fit,
                                     enum SvmAsymFitVector which,
                                     double *out,
                                     uintptr_t len);

// Number of training points on the margin boundary.
//
// # Safety
// `fit` must be a live handle and `count` writable.
enum SvmAsymStatus svm_asym_fit_boundary_count(const struct SvmAsymFit *fit,
                                               double eps_dual,
                                               uintptr_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SVM_ASYM_H */
