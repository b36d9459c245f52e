#ifndef SEMEDGE_H
#define SEMEDGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum {
  SEMEDGE_STATUS_OK = 0,
  SEMEDGE_STATUS_NULL_POINTER = 1,
  SEMEDGE_STATUS_INVALID_UTF8 = 2,
  SEMEDGE_STATUS_DIMENSION = 3,
  SEMEDGE_STATUS_EMPTY = 4,
  SEMEDGE_STATUS_OUT_OF_RANGE = 5,
  SEMEDGE_STATUS_MALFORMED_LENGTH = 6,
  SEMEDGE_STATUS_CONFIG = 7,
  SEMEDGE_STATUS_DATA = 8,
  SEMEDGE_STATUS_NON_FINITE = 9,
  SEMEDGE_STATUS_FORMAT = 10,
  SEMEDGE_STATUS_IO = 11,
  SEMEDGE_STATUS_BUFFER_TOO_SMALL = 12,
  SEMEDGE_STATUS_PANIC = 13,
} SemedgeStatus;

/**
 * Opaque trained model.
 */
typedef struct SemedgeModel SemedgeModel;

/**
 * Static description of a loaded model.
 */
typedef struct {
  size_t k_devices;
  /**
   * Shape of one device view (channels, height, width), row-major.
   */
  size_t view_channels;
  size_t view_height;
  size_t view_width;
  size_t a_in;
  size_t a_out;
  size_t classes;
  /**
   * 1 for the digital transceiver, 0 for analog transmission.
   */
  uint8_t digital;
  double z_min;
  double z_max;
  /**
   * Seed stored with the checkpoint.
   */
  uint64_t seed;
} SemedgeModelInfo;

/**
 * Link condition for inference. `q_b` and `r` are only read by digital
 * models.
 */
typedef struct {
  double snr_db;
  uint32_t q_b;
  uint32_t r;
  /**
   * Non-zero disables channel noise.
   */
  uint8_t noiseless;
} SemedgeChannel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *semedge_version(void);

/**
 * Length in bytes of the calling thread's last error message, without the
 * terminating NUL. Zero after a successful call.
 */
size_t semedge_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated).
 *
 * # Safety
 * `buf` must point to `len` writable bytes.
 */
SemedgeStatus semedge_last_error_message(char *buf, size_t len);

/**
 * Loads a checkpoint written by `semedge train-uda` or `finetune-kd`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer. On
 * success `*out` owns a model that must be released with
 * [`semedge_model_free`].
 */
SemedgeStatus semedge_model_load(const char *path, SemedgeModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`semedge_model_load`] and not be used afterwards.
 */
void semedge_model_free(SemedgeModel *model);

/**
 * # Safety
 * `model` and `out` must be valid pointers.
 */
SemedgeStatus semedge_model_info(const SemedgeModel *model, SemedgeModelInfo *out);

/**
 * Classifies one multi-view sample sent over `channel`.
 *
 * `views` holds the K device views back to back, each in
 * channel/height/width order (`k_devices * c * h * w` values). The class
 * distribution is written to `probs` (`classes` values) and the argmax to
 * `label` when it is not null. The noise realisation is fixed by `seed`.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
SemedgeStatus semedge_model_predict(const SemedgeModel *model,
                                    const double *views,
                                    size_t views_len,
                                    const SemedgeChannel *channel,
                                    uint64_t seed,
                                    double *probs,
                                    size_t probs_len,
                                    size_t *label);

/**
 * Quantization indices of `n` values in `[z_min, z_max]`.
 *
 * # Safety
 * `z` and `out` must hold `n` elements.
 */
SemedgeStatus semedge_quantize(const double *z,
                               size_t n,
                               uint32_t q_b,
                               double z_min,
                               double z_max,
                               uint32_t *out);

/**
 * Reconstruction values of `n` quantization indices.
 *
 * # Safety
 * `indices` and `out` must hold `n` elements.
 */
SemedgeStatus semedge_dac(const uint32_t *indices,
                          size_t n,
                          uint32_t q_b,
                          double z_min,
                          double z_max,
                          double *out);

/**
 * Differentiable rounding surrogate of depth `r`.
 */
double semedge_soft_round(double x, uint32_t r);

/**
 * Gaussian kernel between two `n`-dimensional points.
 *
 * # Safety
 * `x1` and `x2` must hold `n` elements and `out` must be valid.
 */
SemedgeStatus semedge_gaussian_kernel(const double *x1,
                                      const double *x2,
                                      size_t n,
                                      double bandwidth,
                                      double *out);

/**
 * Adaptation warm-up factor at epoch `e` of `total`.
 */
double semedge_warmup_delta(size_t e, size_t total);

/**
 * Annealed learning rate at epoch `e` of `total`.
 */
double semedge_lr_anneal(double eta0, size_t e, size_t total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMEDGE_H */
