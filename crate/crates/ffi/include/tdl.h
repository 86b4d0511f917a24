#ifndef TDL_H
#define TDL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum TdlStatus {
  TDL_STATUS_OK = 0,
  TDL_STATUS_NULL_POINTER = 1,
  TDL_STATUS_INVALID_INPUT = 2,
  TDL_STATUS_PROTOCOL = 3,
  TDL_STATUS_NUMERICAL = 4,
  TDL_STATUS_CONFIG = 5,
  TDL_STATUS_IO = 6,
  TDL_STATUS_FORMAT = 7,
  TDL_STATUS_PANIC = 8,
} TdlStatus;

/**
 * Labelled feature vectors to train on.
 */
typedef struct TdlDataset TdlDataset;

/**
 * A positive semidefinite metric matrix.
 */
typedef struct TdlMetric TdlMetric;

/**
 * Training hyper-parameters; start from [`tdl_train_config_default`].
 */
typedef struct TdlTrainConfig {
  double alpha;
  double rho;
  double lambda0;
  double lambda_up;
  double lambda_down;
  size_t max_iters;
  double rel_tol;
  double lambda_floor;
  uint64_t rng_seed;
  double anchor_fraction;
} TdlTrainConfig;

typedef struct TdlTrainSummary {
  size_t iters_run;
  size_t accepted;
  size_t rejected;
  bool converged;
  double initial_loss;
  double final_loss;
} TdlTrainSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *tdl_last_error_message(void);

/**
 * Static, NUL-terminated name of `status`.
 */
const char *tdl_status_name(enum TdlStatus status);

const char *tdl_version(void);

/**
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum TdlStatus tdl_metric_identity(size_t dim, struct TdlMetric **out);

/**
 * Builds a metric from `dim * dim` row-major entries. The matrix is
 * symmetrised and must be PSD within tolerance.
 *
 * # Safety
 * `entries` must point to `dim * dim` doubles; `out` must be writable.
 */
enum TdlStatus tdl_metric_from_entries(const double *entries, size_t dim, struct TdlMetric **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TdlStatus tdl_metric_load(const char *path, struct TdlMetric **out);

/**
 * # Safety
 * `metric` must be a live handle and `path` a NUL-terminated string.
 */
enum TdlStatus tdl_metric_save(const struct TdlMetric *metric, const char *path);

/**
 * Dimension of `metric`, or 0 for null.
 *
 * # Safety
 * `metric` must be null or a live handle.
 */
size_t tdl_metric_dim(const struct TdlMetric *metric);

/**
 * Copies the row-major entries into `out`, which holds `len >= dim * dim`
 * doubles.
 *
 * # Safety
 * `metric` must be a live handle and `out` writable for `len` doubles.
 */
enum TdlStatus tdl_metric_entries(const struct TdlMetric *metric, double *out, size_t len);

/**
 * # Safety
 * `metric` must be null or a handle not yet freed.
 */
void tdl_metric_free(struct TdlMetric *metric);

/**
 * `(x - y)^T M (x - y)` for two `dim`-vectors.
 *
 * # Safety
 * `x`, `y` must hold `dim` doubles; `out` must be writable.
 */
enum TdlStatus tdl_metric_distance(const struct TdlMetric *metric,
                                   const double *x,
                                   const double *y,
                                   size_t dim,
                                   double *out);

/**
 * Orders `count` gallery rows (row-major, `dim` columns) by distance to
 * `probe`, nearest first; ties keep gallery order. Writes `count` indices.
 *
 * # Safety
 * `probe` holds `dim` doubles, `gallery` `count * dim`, `out_order` is
 * writable for `count` entries.
 */
enum TdlStatus tdl_rank_gallery(const struct TdlMetric *metric,
                                const double *probe,
                                const double *gallery,
                                size_t count,
                                size_t dim,
                                size_t *out_order);

/**
 * # Safety
 * `out` must be writable.
 */
enum TdlStatus tdl_dataset_new(struct TdlDataset **out);

/**
 * Reads every record of a `TDLF` feature store into a new dataset.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TdlStatus tdl_dataset_load_store(const char *path, struct TdlDataset **out);

/**
 * Appends one sample. All samples must share a dimension.
 *
 * # Safety
 * `dataset` must be a live handle, `features` hold `dim` doubles, and the
 * ids be NUL-terminated strings.
 */
enum TdlStatus tdl_dataset_push(struct TdlDataset *dataset,
                                const double *features,
                                size_t dim,
                                const char *person_id,
                                const char *camera_id);

/**
 * Number of samples, or 0 for null.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t tdl_dataset_len(const struct TdlDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void tdl_dataset_free(struct TdlDataset *dataset);

struct TdlTrainConfig tdl_train_config_default(void);

/**
 * Trains a metric from the identity on `dataset`. `summary` may be null.
 *
 * # Safety
 * `dataset` and `config` must be valid; `out` writable; `summary` null or
 * writable.
 */
enum TdlStatus tdl_train(const struct TdlDataset *dataset,
                         const struct TdlTrainConfig *config,
                         struct TdlMetric **out,
                         struct TdlTrainSummary *summary);

/**
 * Nearest PSD matrix (Frobenius norm) to the symmetric part of `input`.
 * `input` and `output` are `dim * dim` row-major and may alias.
 *
 * # Safety
 * Both pointers must be valid for `dim * dim` doubles.
 */
enum TdlStatus tdl_psd_project(const double *input, size_t dim, double *output);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDL_H */
