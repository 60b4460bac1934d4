/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef REGUNET_H
#define REGUNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RG_SPLIT_TRAIN 0

#define RG_SPLIT_VAL 1

#define RG_SPLIT_TEST 2

#define RG_VARIANT_REGUNET 0

#define RG_VARIANT_BASELINE1 1

#define RG_VARIANT_BASELINE2 2

#define RG_VARIANT_BASELINE3 3

typedef enum RgStatus {
  RG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RG_STATUS_NULL_ARGUMENT = 1,
  /**
   * Bad argument value, configuration or shape.
   */
  RG_STATUS_INVALID_INPUT = 2,
  RG_STATUS_IO = 3,
  /**
   * Malformed dataset, sample or checkpoint file.
   */
  RG_STATUS_FORMAT = 4,
  /**
   * Numerical failure (divergence, non-finite values, failed check).
   */
  RG_STATUS_RUNTIME = 5,
  RG_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A bug inside the library; the handle involved should be discarded.
   */
  RG_STATUS_PANIC = 7,
} RgStatus;

typedef struct RgDataset RgDataset;

typedef struct RgModel RgModel;

typedef struct RgSample RgSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rg_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *rg_version(void);

/**
 * Writes a synthetic dataset to `out_dir`. `config_path` may be null for the
 * desk preset; `seed` overrides its seeds when `use_seed` is non-zero.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` (optional) receives a new handle.
 */
enum RgStatus rg_dataset_generate(const char *config_path,
                                  const char *out_dir,
                                  uint64_t seed,
                                  int32_t use_seed,
                                  struct RgDataset **out);

/**
 * # Safety
 * `dir` must be NUL-terminated and `out` writable.
 */
enum RgStatus rg_dataset_open(const char *dir, struct RgDataset **out);

/**
 * Number of samples in `split`.
 *
 * # Safety
 * `ds` must come from this library; `count` must be writable.
 */
enum RgStatus rg_dataset_count(const struct RgDataset *ds, uint32_t split, size_t *count);

/**
 * Loads sample `index` of `split`.
 *
 * # Safety
 * `ds` must come from this library; `out` must be writable.
 */
enum RgStatus rg_dataset_sample(const struct RgDataset *ds,
                                uint32_t split,
                                size_t index,
                                struct RgSample **out);

/**
 * # Safety
 * `ds` must come from this library or be null; it is invalid afterwards.
 */
void rg_dataset_free(struct RgDataset *ds);

/**
 * Reads an `RGSQ` sample file.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum RgStatus rg_sample_load(const char *path, struct RgSample **out);

/**
 * # Safety
 * `s` must come from this library; outputs must be writable.
 */
enum RgStatus rg_sample_shape(const struct RgSample *s, size_t *nodes, size_t *steps);

/**
 * Ground-truth positions, `steps x nodes x 3` doubles in row-major order.
 *
 * # Safety
 * `s` must come from this library; `buf` must hold `cap` doubles.
 */
enum RgStatus rg_sample_positions(const struct RgSample *s, double *buf, size_t cap);

/**
 * # Safety
 * `s` must come from this library or be null; it is invalid afterwards.
 */
void rg_sample_free(struct RgSample *s);

/**
 * Loads a checkpoint against the benchmark hierarchy of `ds`. `variant` is
 * one of the `RG_VARIANT_*` codes, or `UINT32_MAX` to accept any.
 *
 * # Safety
 * `path` must be NUL-terminated, `ds` from this library, `out` writable.
 */
enum RgStatus rg_model_load(const char *path,
                            const struct RgDataset *ds,
                            uint32_t variant,
                            struct RgModel **out);

/**
 * # Safety
 * `m` must come from this library; `variant` must be writable.
 */
enum RgStatus rg_model_variant(const struct RgModel *m, uint32_t *variant);

/**
 * Autoregressive rollout from the sample's first snapshot; writes predicted
 * positions, `steps x nodes x 3` doubles.
 *
 * # Safety
 * Handles must come from this library; `buf` must hold `cap` doubles.
 */
enum RgStatus rg_model_rollout(const struct RgModel *m,
                               const struct RgSample *s,
                               double *buf,
                               size_t cap);

/**
 * Mean autoregressive error per snapshot over `split`, in mm; `steps`
 * receives the curve length.
 *
 * # Safety
 * Handles must come from this library; `buf` must hold `cap` doubles.
 */
enum RgStatus rg_error_accumulation(const struct RgModel *m,
                                    const struct RgDataset *ds,
                                    uint32_t split,
                                    double *buf,
                                    size_t cap,
                                    size_t *steps);

/**
 * # Safety
 * `m` must come from this library or be null; it is invalid afterwards.
 */
void rg_model_free(struct RgModel *m);

/**
 * Finite-difference check of the toy ReGUNet gradient with default
 * settings. Returns `RG_STATUS_RUNTIME` when the tolerance is missed; the
 * error is written either way.
 *
 * # Safety
 * `max_relative_error` must be writable.
 */
enum RgStatus rg_gradcheck(uint64_t seed, double *max_relative_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGUNET_H */
