#ifndef URP_H
#define URP_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum UrpStatus {
  URP_STATUS_OK = 0,
  URP_STATUS_NULL_POINTER = 1,
  URP_STATUS_INVALID_ARGUMENT = 2,
  URP_STATUS_IO = 3,
  URP_STATUS_PARSE = 4,
  URP_STATUS_INSUFFICIENT_DATA = 5,
  URP_STATUS_DEGENERATE = 6,
  URP_STATUS_DIMENSION_MISMATCH = 7,
  URP_STATUS_UNSUPPORTED = 8,
  URP_STATUS_SCHEMA_MISMATCH = 9,
  URP_STATUS_BUFFER_TOO_SMALL = 10,
  URP_STATUS_PANIC = 99,
} UrpStatus;

typedef struct UrpDataset UrpDataset;

typedef struct UrpTree UrpTree;

/**
 * Growth parameters; obtain defaults from [`urp_grow_control_default`].
 */
typedef struct UrpGrowControl {
  double alpha;
  size_t min_node_size;
  /**
   * 0 selects the per-node default.
   */
  size_t min_segment;
  size_t max_depth;
  bool prepruning;
} UrpGrowControl;

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *urp_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void urp_string_free(char *s);

struct UrpGrowControl urp_grow_control_default(void);

/**
 * Creates a dataset of `n` rows with no split variables.
 *
 * # Safety
 * `y` and `x` must point to `n` doubles; `out` must be writable.
 */
enum UrpStatus urp_dataset_new(const double *y,
                               const double *x,
                               size_t n,
                               struct UrpDataset **out_ds);

/**
 * # Safety
 * `ds` must be a live dataset; `values` must point to `n` doubles.
 */
enum UrpStatus urp_dataset_add_numeric(struct UrpDataset *ds,
                                       const char *name,
                                       const double *values,
                                       size_t n);

/**
 * Adds a categorical split variable; `codes[i]` indexes `levels`.
 *
 * # Safety
 * `ds` must be a live dataset; `codes` must point to `n` values and
 * `levels` to `n_levels` NUL-terminated strings.
 */
enum UrpStatus urp_dataset_add_categorical(struct UrpDataset *ds,
                                           const char *name,
                                           const uint32_t *codes,
                                           size_t n,
                                           const char *const *levels,
                                           size_t n_levels);

/**
 * Loads a CSV file. `split` and `categorical` are comma-separated column
 * lists; `categorical` may be null.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_ds` must be writable.
 */
enum UrpStatus urp_dataset_load_csv(const char *path,
                                    const char *response,
                                    const char *regressor,
                                    const char *split,
                                    const char *categorical,
                                    struct UrpDataset **out_ds);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset.
 */
size_t urp_dataset_n(const struct UrpDataset *ds);

/**
 * Number of split variables, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset.
 */
size_t urp_dataset_n_split(const struct UrpDataset *ds);

/**
 * # Safety
 * `ds` must be null or a dataset not yet freed.
 */
void urp_dataset_free(struct UrpDataset *ds);

/**
 * Tests every split variable against the full-sample fit. Writes one
 * p-value per split variable and the chosen index (-1 when no p-value falls
 * below `alpha`). Degenerate tests report a p-value of 1.
 *
 * # Safety
 * `p_values` must hold `len` doubles with `len >= urp_dataset_n_split(ds)`.
 */
enum UrpStatus urp_select_variable(const struct UrpDataset *ds,
                                   const char *strategy_name,
                                   double alpha,
                                   double *p_values,
                                   size_t len,
                                   int64_t *out_chosen);

/**
 * # Safety
 * `ds` must be a live dataset, `control` null (defaults) or valid, and
 * `out_tree` writable.
 */
enum UrpStatus urp_tree_grow(const struct UrpDataset *ds,
                             const char *strategy_name,
                             const struct UrpGrowControl *control,
                             struct UrpTree **out_tree);

/**
 * Cost-complexity pruning with the penalty chosen by `folds`-fold
 * cross-validation on `ds`.
 *
 * # Safety
 * Handles must be live; `out_tree` writable.
 */
enum UrpStatus urp_tree_prune_cv(const struct UrpTree *tree,
                                 const struct UrpDataset *ds,
                                 size_t folds,
                                 uint64_t seed,
                                 bool one_se,
                                 struct UrpTree **out_tree);

/**
 * Information-criterion pruning: `criterion` is "aic" or "bic".
 *
 * # Safety
 * `tree` must be live; `out_tree` writable.
 */
enum UrpStatus urp_tree_prune_ic(const struct UrpTree *tree,
                                 const char *criterion,
                                 struct UrpTree **out_tree);

/**
 * # Safety
 * `tree` must be null or a live tree.
 */
size_t urp_tree_n_leaves(const struct UrpTree *tree);

/**
 * # Safety
 * `tree` must be null or a live tree.
 */
size_t urp_tree_depth(const struct UrpTree *tree);

/**
 * Serializes the tree; free the result with [`urp_string_free`].
 *
 * # Safety
 * `tree` must be live; `out_json` writable.
 */
enum UrpStatus urp_tree_to_json(const struct UrpTree *tree, char **out_json);

/**
 * Loads a tree document and refits its nodes on `ds`.
 *
 * # Safety
 * `json` must be NUL-terminated, `ds` live, `out_tree` writable.
 */
enum UrpStatus urp_tree_from_json(const char *json,
                                  const struct UrpDataset *ds,
                                  struct UrpTree **out_tree);

/**
 * Leaf-model predictions for every row of `ds`.
 *
 * # Safety
 * `out_values` must hold `len >= urp_dataset_n(ds)` doubles.
 */
enum UrpStatus urp_tree_predict(const struct UrpTree *tree,
                                const struct UrpDataset *ds,
                                double *out_values,
                                size_t len);

/**
 * Leaf node id of every row of `ds`.
 *
 * # Safety
 * `out_labels` must hold `len >= urp_dataset_n(ds)` values.
 */
enum UrpStatus urp_tree_labels(const struct UrpTree *tree,
                               const struct UrpDataset *ds,
                               size_t *out_labels,
                               size_t len);

/**
 * # Safety
 * `tree` must be null or a tree not yet freed.
 */
void urp_tree_free(struct UrpTree *tree);

/**
 * Adjusted Rand index between two labelings of `n` items.
 *
 * # Safety
 * `a` and `b` must point to `n` values; `out_ari` must be writable.
 */
enum UrpStatus urp_adjusted_rand_index(const size_t *a, const size_t *b, size_t n, double *out_ari);

#endif  /* URP_H */
