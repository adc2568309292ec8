#ifndef LOGICSENT_H
#define LOGICSENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_ARGUMENT = 2,
  LS_STATUS_IO = 3,
  LS_STATUS_FORMAT = 4,
  LS_STATUS_NUMERIC = 5,
  /**
   * The statistic is undefined for this input (e.g. kappa with a single
   * category in use).
   */
  LS_STATUS_UNDEFINED = 6,
  LS_STATUS_INTERNAL = 7,
} LsStatus;

typedef enum LsCrowdLabel {
  LS_CROWD_LABEL_NEGATIVE = 0,
  LS_CROWD_LABEL_NEUTRAL = 1,
  LS_CROWD_LABEL_POSITIVE = 2,
} LsCrowdLabel;

/**
 * A trained classifier loaded from a checkpoint.
 */
typedef struct LsModel LsModel;

typedef struct LsKsResult {
  double d;
  double p_value;
  bool significant;
} LsKsResult;

typedef struct LsSummary {
  size_t n;
  double mean;
  /**
   * NaN for a single value.
   */
  double ci95;
  double min;
  double p25;
  double p50;
  double p75;
  double max;
} LsSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ls_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * Projects `p(+) = p_pos` under rule score `(r_pos, r_neg)` with strength
 * `c`; writes `q(+)`.
 *
 * # Safety
 * `q_pos` must be valid for one write.
 */
enum LsStatus ls_project(double p_pos, double r_pos, double r_neg, double c, double *q_pos);

/**
 * `KL(q || p)` in nats for binary distributions given by their positive
 * mass. May be infinite.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum LsStatus ls_kl_divergence(double q_pos, double p_pos, double *out);

/**
 * Two-sided two-sample Kolmogorov-Smirnov test.
 *
 * # Safety
 * `a` and `b` must be valid for `n_a` and `n_b` reads; `out` for one write.
 */
enum LsStatus ls_ks_test(const double *a,
                         size_t n_a,
                         const double *b,
                         size_t n_b,
                         double alpha,
                         struct LsKsResult *out);

/**
 * Mean, 95% interval half-width and quartiles.
 *
 * # Safety
 * `values` must be valid for `n` reads; `out` for one write.
 */
enum LsStatus ls_summarize(const double *values, size_t n, struct LsSummary *out);

/**
 * Fleiss' kappa of `n_items × n_raters` scores (row-major), each 0, 0.5
 * or 1. Returns `LS_STATUS_UNDEFINED` when only one category is used.
 *
 * # Safety
 * `scores` must be valid for `n_items * n_raters` reads; `out` for one
 * write.
 */
enum LsStatus ls_fleiss_kappa(const double *scores, size_t n_items, size_t n_raters, double *out);

/**
 * Crowd label of a mean score at ambiguity threshold `x` in `[0.5, 1)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum LsStatus ls_crowd_classify(double mean, double x, enum LsCrowdLabel *out);

/**
 * Loads a model checkpoint. Release the handle with [`ls_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for one write.
 */
enum LsStatus ls_model_load(const char *path, struct LsModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`ls_model_load`] not yet freed.
 */
void ls_model_free(struct LsModel *model);

/**
 * Input vector size of the model.
 *
 * # Safety
 * `model` must be a live handle; `out` valid for one write.
 */
enum LsStatus ls_model_dim(const struct LsModel *model, size_t *out);

/**
 * Whether the model carries its own word-embedding table, i.e. accepts
 * tokens rather than vectors.
 *
 * # Safety
 * `model` must be a live handle; `out` valid for one write.
 */
enum LsStatus ls_model_has_vocabulary(const struct LsModel *model, bool *out);

/**
 * `p(+ | sentence)` for a tokenized sentence. Unknown words read as zero
 * vectors.
 *
 * # Safety
 * `model` must be a live handle; `tokens` valid for `n_tokens` pointers to
 * NUL-terminated strings; `p_pos` valid for one write.
 */
enum LsStatus ls_model_predict_tokens(const struct LsModel *model,
                                      const char *const *tokens,
                                      size_t n_tokens,
                                      double *p_pos);

/**
 * `p(+ | sentence)` for `n_tokens` row-major vectors of the model's
 * dimension.
 *
 * # Safety
 * `model` must be a live handle; `vectors` valid for `n_tokens * dim`
 * reads; `p_pos` valid for one write.
 */
enum LsStatus ls_model_predict_vectors(const struct LsModel *model,
                                       const double *vectors,
                                       size_t n_tokens,
                                       double *p_pos);

/**
 * Raw and rule-projected `p(+)` for a tokenized sentence whose B clause is
 * `tokens[b_start..b_end]`. Pass `b_start == b_end` for sentences without
 * the A-but-B structure; then `q_pos == p_pos`.
 *
 * # Safety
 * As [`ls_model_predict_tokens`]; `p_pos` and `q_pos` valid for one write.
 */
enum LsStatus ls_model_project_tokens(const struct LsModel *model,
                                      const char *const *tokens,
                                      size_t n_tokens,
                                      size_t b_start,
                                      size_t b_end,
                                      double c,
                                      double *p_pos,
                                      double *q_pos);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGICSENT_H */
