#ifndef GABORCNN_H
#define GABORCNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_POINTER = 1,
  GC_STATUS_INVALID_ARGUMENT = 2,
  GC_STATUS_SHAPE = 3,
  GC_STATUS_IO = 4,
  GC_STATUS_FORMAT = 5,
  GC_STATUS_BUFFER_TOO_SMALL = 6,
  GC_STATUS_INTERNAL = 7,
} GcStatus;

/*
 Bank preset selector.
 */
typedef enum GcPreset {
  GC_PRESET_AGE_GENDER = 0,
  GC_PRESET_DETECTION = 1,
  GC_PRESET_FER = 2,
} GcPreset;

/*
 Border handling for bank responses.
 */
typedef enum GcBorder {
  GC_BORDER_ZERO = 0,
  GC_BORDER_REPLICATE = 1,
} GcBorder;

/*
 Eight-kernel Gabor filter bank.
 */
typedef struct GcBank GcBank;

/*
 Three-stage detector.
 */
typedef struct GcCascade GcCascade;

/*
 Grayscale image.
 */
typedef struct GcImage GcImage;

/*
 Trained network loaded from a checkpoint.
 */
typedef struct GcNetwork GcNetwork;

/*
 Axis-aligned box, top-left corner and extent.
 */
typedef struct GcBox {
  double x;
  double y;
  double w;
  double h;
} GcBox;

typedef struct GcDetection {
  struct GcBox bbox;
  double score;
} GcDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *gc_last_error(void);

/*
 Copy `height * width` row-major pixels into a new image.

 # Safety
 `pixels` must point to `height * width` readable values; `out` must be
 writable.
 */
enum GcStatus gc_image_new(size_t height, size_t width, const double *pixels, struct GcImage **out);

/*
 Load a PGM or PPM file as a grayscale image in `[0, 1]`.

 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum GcStatus gc_image_load(const char *path, struct GcImage **out);

/*
 # Safety
 `image` must be a live handle or null.
 */
size_t gc_image_height(const struct GcImage *image);

/*
 # Safety
 `image` must be a live handle or null.
 */
size_t gc_image_width(const struct GcImage *image);

/*
 Copy the pixels into `out`, which must hold `height * width` values.

 # Safety
 `image` must be a live handle; `out` must have room for `len` values.
 */
enum GcStatus gc_image_pixels(const struct GcImage *image, double *out, size_t len);

/*
 # Safety
 `image` must be a handle from this library, not yet freed, or null.
 */
void gc_image_free(struct GcImage *image);

/*
 Bank of 8 kernels, orientation-major over 0, 45, 90, 135 degrees and
 phase-minor over 0 and 90 degrees.

 # Safety
 `out` must be writable.
 */
enum GcStatus gc_bank_new(enum GcPreset preset, struct GcBank **out);

/*
 # Safety
 `bank` must be a live handle or null.
 */
size_t gc_bank_len(const struct GcBank *bank);

/*
 Side length of the kernels, or 0 for a null handle.

 # Safety
 `bank` must be a live handle or null.
 */
size_t gc_bank_kernel_size(const struct GcBank *bank);

/*
 Copy kernel `index` row-major into `out`.

 # Safety
 `bank` must be a live handle; `out` must have room for `len` values.
 */
enum GcStatus gc_bank_kernel(const struct GcBank *bank, size_t index, double *out, size_t len);

/*
 # Safety
 `bank` must be a handle from this library, not yet freed, or null.
 */
void gc_bank_free(struct GcBank *bank);

/*
 Responses of every kernel, written channel after channel, each
 row-major: `out` needs `bank_len * height * width` values.

 # Safety
 Handles must be live; `out` must have room for `len` values.
 */
enum GcStatus gc_apply_bank(const struct GcImage *image,
                            const struct GcBank *bank,
                            enum GcBorder border,
                            double *out,
                            size_t len);

/*
 Fused image `w[0] * I + sum_k w[k] * F_k` with replicated borders.
 `weights` holds `bank_len + 1` values.

 # Safety
 Handles must be live; `weights` must hold `n_weights` values; `out`
 must be writable.
 */
enum GcStatus gc_fuse(const struct GcImage *image,
                      const struct GcBank *bank,
                      const double *weights,
                      size_t n_weights,
                      struct GcImage **out);

/*
 Intersection over union; 0 for invalid boxes.
 */
double gc_iou(struct GcBox a, struct GcBox b);

/*
 Greedy non-maximum suppression. Kept detections are written to `out`
 in score order; `n_out` receives their count. `out` may alias `dets`.

 # Safety
 `dets` must hold `n` values; `out` must have room for `n` values;
 `n_out` must be writable.
 */
enum GcStatus gc_nms(const struct GcDetection *dets,
                     size_t n,
                     double iou_thresh,
                     struct GcDetection *out,
                     size_t *n_out);

/*
 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum GcStatus gc_network_load(const char *path, struct GcNetwork **out);

/*
 Values the network takes: height * width * channels, channel-last.

 # Safety
 `net` must be a live handle or null.
 */
size_t gc_network_input_len(const struct GcNetwork *net);

/*
 # Safety
 `net` must be a live handle or null.
 */
size_t gc_network_output_len(const struct GcNetwork *net);

/*
 Evaluation-mode forward pass on a channel-last input.

 # Safety
 `net` must be a live handle; `input` must hold `input_len` values and
 `out` have room for `out_len` values.
 */
enum GcStatus gc_network_predict(const struct GcNetwork *net,
                                 const double *input,
                                 size_t input_len,
                                 double *out,
                                 size_t out_len);

/*
 # Safety
 `net` must be a handle from this library, not yet freed, or null.
 */
void gc_network_free(struct GcNetwork *net);

/*
 Load `pnet.ckpt`, `rnet.ckpt` and `onet.ckpt` from `dir` with default
 thresholds.

 # Safety
 `dir` must be a nul-terminated string; `out` must be writable.
 */
enum GcStatus gc_cascade_load(const char *dir, struct GcCascade **out);

/*
 Detect faces. Writes up to `cap` detections in score order and stores
 the total count in `n_out`; returns `GC_STATUS_BUFFER_TOO_SMALL` when
 `cap` is short.

 # Safety
 Handles must be live; `out` must have room for `cap` values; `n_out`
 must be writable.
 */
enum GcStatus gc_cascade_detect(const struct GcCascade *cascade,
                                const struct GcImage *image,
                                struct GcDetection *out,
                                size_t cap,
                                size_t *n_out);

/*
 # Safety
 `cascade` must be a handle from this library, not yet freed, or null.
 */
void gc_cascade_free(struct GcCascade *cascade);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GABORCNN_H */
