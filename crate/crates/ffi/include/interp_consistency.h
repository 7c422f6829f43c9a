#ifndef INTERP_CONSISTENCY_H
#define INTERP_CONSISTENCY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IcStatus {
  IC_STATUS_OK = 0,
  IC_STATUS_NULL_POINTER = 1,
  IC_STATUS_INVALID_ARGUMENT = 2,
  IC_STATUS_IO = 3,
  IC_STATUS_PARSE = 4,
  IC_STATUS_DATA = 5,
  IC_STATUS_PANIC = 6,
} IcStatus;

typedef enum IcAlternative {
  IC_ALTERNATIVE_GREATER = 0,
  IC_ALTERNATIVE_TWO_SIDED = 1,
} IcAlternative;

typedef enum IcLearner {
  IC_LEARNER_LOGISTIC_REGRESSION = 0,
  IC_LEARNER_CART = 1,
  IC_LEARNER_RANDOM_FOREST = 2,
  IC_LEARNER_GBDT = 3,
} IcLearner;

typedef enum IcExperiment {
  IC_EXPERIMENT_RQ1 = 1,
  IC_EXPERIMENT_RQ2 = 2,
  IC_EXPERIMENT_RQ3 = 3,
} IcExperiment;

/*
 Opaque periodized dataset.
 */
typedef struct IcDataset IcDataset;

/*
 Opaque fitted model with its training scaler.
 */
typedef struct IcModel IcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 valid until the next failing call on the same thread.
 */
const char *ic_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ic_version(void);

/*
 Seed derived from `master` and `n_labels` UTF-8 string labels.

 # Safety
 `labels` must point to `n_labels` valid NUL-terminated strings.
 */
enum IcStatus ic_derive_seed(uint64_t master,
                             const char *const *labels,
                             size_t n_labels,
                             uint64_t *out);

/*
 Kendall's tau-b between two rank vectors of length `n`.

 # Safety
 `a` and `b` must point to `n` doubles.
 */
enum IcStatus ic_kendalls_tau(const double *a, const double *b, size_t n, double *out);

/*
 Kendall's W of `m` rankings of `n` items stored row-major.

 # Safety
 `ranks` must point to `m * n` doubles.
 */
enum IcStatus ic_kendalls_w(const double *ranks, size_t m, size_t n, double *out);

/*
 ROC AUC of `scores` against 0/1 `labels`.

 # Safety
 `labels` and `scores` must point to `n` elements.
 */
enum IcStatus ic_auc(const uint8_t *labels, const double *scores, size_t n, double *out);

/*
 Cliff's delta of `x` over `y`.

 # Safety
 `x` and `y` must point to `nx` and `ny` doubles.
 */
enum IcStatus ic_cliffs_delta(const double *x, size_t nx, const double *y, size_t ny, double *out);

/*
 Wilcoxon rank-sum test; writes the U statistic of `x` and the p-value.

 # Safety
 `x` and `y` must point to `nx` and `ny` doubles.
 */
enum IcStatus ic_wilcoxon_rank_sum(const double *x,
                                   size_t nx,
                                   const double *y,
                                   size_t ny,
                                   enum IcAlternative alternative,
                                   double *out_statistic,
                                   double *out_p);

/*
 Kruskal-Wallis H test over `n_groups` groups laid out back to back in
 `values`; `sizes[i]` is the length of group `i`.

 # Safety
 `sizes` must point to `n_groups` counts and `values` to their sum.
 */
enum IcStatus ic_kruskal_wallis(const double *values,
                                const size_t *sizes,
                                size_t n_groups,
                                double *out_statistic,
                                double *out_p);

/*
 Jenks natural breaks into `k` clusters. Writes the cluster index of each
 value (0 = lowest) to `out_assignment` and the total WSS to `out_wss`.

 # Safety
 `values` and `out_assignment` must point to `n` elements.
 */
enum IcStatus ic_jenks_breaks(const double *values,
                              size_t n,
                              size_t k,
                              size_t *out_assignment,
                              double *out_wss);

/*
 Loads a periodized CSV file.

 # Safety
 String arguments must be valid NUL-terminated strings; `out` must be writable.
 */
enum IcStatus ic_dataset_load_csv(const char *path,
                                  const char *label_column,
                                  const char *period_column,
                                  struct IcDataset **out);

/*
 Generates a synthetic dataset with `informative` leading signal features.

 # Safety
 `out` must be writable.
 */
enum IcStatus ic_dataset_synthetic(size_t periods,
                                   size_t rows,
                                   size_t features,
                                   size_t informative,
                                   double positive_rate,
                                   double drift,
                                   double nonlinearity,
                                   uint64_t seed,
                                   struct IcDataset **out);

/*
 Number of periods, or 0 for NULL.

 # Safety
 `dataset` must be NULL or a live handle.
 */
size_t ic_dataset_n_periods(const struct IcDataset *dataset);

/*
 Number of features, or 0 for NULL.

 # Safety
 `dataset` must be NULL or a live handle.
 */
size_t ic_dataset_n_features(const struct IcDataset *dataset);

/*
 Rows in one period, or 0 for NULL or an out-of-range index.

 # Safety
 `dataset` must be NULL or a live handle.
 */
size_t ic_dataset_period_rows(const struct IcDataset *dataset, size_t period);

/*
 # Safety
 `dataset` must be NULL or a handle not yet freed.
 */
void ic_dataset_free(struct IcDataset *dataset);

/*
 Trains a learner with default hyperparameters on one period, with the
 preprocessing used by the experiments (10:1 downsampling, standardization).

 # Safety
 `dataset` must be a live handle and `out` writable.
 */
enum IcStatus ic_model_train(const struct IcDataset *dataset,
                             enum IcLearner learner,
                             size_t period,
                             uint64_t seed,
                             struct IcModel **out);

/*
 Positive-class probabilities for `rows` x `cols` row-major features.

 # Safety
 `features` must point to `rows * cols` doubles, `out` to `rows` doubles.
 */
enum IcStatus ic_model_predict(const struct IcModel *model,
                               const double *features,
                               size_t rows,
                               size_t cols,
                               double *out);

/*
 Permutation importance (AUC drop) of every feature on one period.

 # Safety
 `model` and `dataset` must be live handles; `out` must hold
 `n_features` doubles, matching the dataset's feature count.
 */
enum IcStatus ic_model_importance(const struct IcModel *model,
                                  const struct IcDataset *dataset,
                                  size_t period,
                                  size_t repeats,
                                  uint64_t seed,
                                  double *out,
                                  size_t n_features);

/*
 # Safety
 `model` must be NULL or a handle not yet freed.
 */
void ic_model_free(struct IcModel *model);

/*
 Runs one experiment from a JSON configuration and writes its reports to
 `output_dir` (overriding the configuration's own directory when non-NULL).

 # Safety
 `config_json` must be a valid NUL-terminated string; `output_dir` must be
 NULL or one.
 */
enum IcStatus ic_run_experiment(const char *config_json,
                                enum IcExperiment experiment,
                                const char *output_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERP_CONSISTENCY_H */
