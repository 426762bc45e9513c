#ifndef ZBDETECT_H
#define ZBDETECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ZbStatus {
  ZB_STATUS_OK = 0,
  ZB_STATUS_NULL_POINTER = 1,
  ZB_STATUS_INVALID_ARGUMENT = 2,
  ZB_STATUS_DIMENSION_MISMATCH = 3,
  ZB_STATUS_DEGENERATE = 4,
  ZB_STATUS_HEAD_MISMATCH = 5,
  ZB_STATUS_IO = 6,
  ZB_STATUS_PARSE = 7,
  ZB_STATUS_PANIC = 8,
} ZbStatus;

typedef struct ZbDetector ZbDetector;

typedef struct ZbModel ZbModel;

/**
 * A CUSUM, EWMA or sliding-window change detector.
 */
typedef struct ZbSequential ZbSequential;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 * message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` writable bytes.
 */
size_t zb_last_error_message(char *buf, size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ZbStatus zb_model_load(const char *path, struct ZbModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`zb_model_load`] not yet freed.
 */
void zb_model_free(struct ZbModel *model);

/**
 * Input feature length, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t zb_model_input_dim(const struct ZbModel *model);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t zb_model_n_classes(const struct ZbModel *model);

/**
 * 1 for a zero-bias head, 0 for a regular dense head or a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
int32_t zb_model_is_zero_bias(const struct ZbModel *model);

/**
 * Predicted class of one feature vector of length [`zb_model_input_dim`].
 *
 * # Safety
 * `features` must be valid for `len` reads; `class_out` must be valid.
 */
enum ZbStatus zb_model_predict(const struct ZbModel *model,
                               const double *features,
                               size_t len,
                               size_t *class_out);

/**
 * Loads a zero-bias model and its cut-off profile as a binary detector.
 *
 * # Safety
 * Both paths must be NUL-terminated strings and `out` a valid pointer.
 */
enum ZbStatus zb_detector_load(const char *model_path,
                               const char *profile_path,
                               struct ZbDetector **out);

/**
 * # Safety
 * `detector` must be null or a handle from [`zb_detector_load`] not yet freed.
 */
void zb_detector_free(struct ZbDetector *detector);

/**
 * Writes 1 to `alarm_out` when the record matches no known class, else 0.
 *
 * # Safety
 * `features` must be valid for `len` reads; `alarm_out` must be valid.
 */
enum ZbStatus zb_detector_detect(const struct ZbDetector *detector,
                                 const double *features,
                                 size_t len,
                                 uint8_t *alarm_out);

/**
 * Rates predicted from training accuracy.
 *
 * # Safety
 * `fpr_out` and `tpr_out` must be valid pointers.
 */
enum ZbStatus zb_predict_rates_from_accuracy(double acc, double *fpr_out, double *tpr_out);

/**
 * Log-likelihood ratio of detector output `bit` under the given rates.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZbStatus zb_llr(uint8_t bit, double fpr, double tpr, double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZbStatus zb_cusum_new(double fpr, double tpr, double h, struct ZbSequential **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZbStatus zb_ewma_new(double fpr,
                          double tpr,
                          double lambda,
                          double l,
                          struct ZbSequential **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZbStatus zb_window_new(size_t length, double threshold, struct ZbSequential **out);

/**
 * Feeds one detector output; writes 1 to `alarm_out` on alarm.
 *
 * # Safety
 * `detector` must be a live handle and `alarm_out` a valid pointer.
 */
enum ZbStatus zb_sequential_step(struct ZbSequential *detector, uint8_t bit, uint8_t *alarm_out);

/**
 * # Safety
 * `detector` must be null or a live handle.
 */
void zb_sequential_reset(struct ZbSequential *detector);

/**
 * # Safety
 * `detector` must be null or a handle from a `zb_*_new` constructor not yet freed.
 */
void zb_sequential_free(struct ZbSequential *detector);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZBDETECT_H */
