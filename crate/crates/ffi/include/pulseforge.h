#ifndef PULSEFORGE_H
#define PULSEFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_ARGUMENT = 2,
  PF_STATUS_IO = 3,
  PF_STATUS_NUMERIC = 4,
  PF_STATUS_SHAPE_MISMATCH = 5,
  PF_STATUS_PANIC = 6,
} PfStatus;

/**
 * A loaded checkpoint.
 */
typedef struct PfModel PfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *pf_last_error_message(void);

/**
 * Loads a checkpoint directory into a new handle written to `*out`.
 *
 * # Safety
 * `dir` must be a NUL-terminated UTF-8 path and `out` a valid pointer.
 */
PfStatus pf_model_load(const char *dir, PfModel **out);

/**
 * Releases a handle from [`pf_model_load`]. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void pf_model_free(PfModel *model);

/**
 * Number of trainable scalars.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
PfStatus pf_model_param_count(const PfModel *model, size_t *out);

/**
 * Clip geometry the model expects: frames, height and width.
 *
 * # Safety
 * `model` must be a live handle and the outputs valid pointers.
 */
PfStatus pf_model_input_shape(const PfModel *model, size_t *frames, size_t *height, size_t *width);

/**
 * Predicts the pulse waveform of one clip.
 *
 * `clip` holds `3 * frames * height * width` values laid out
 * channel, frame, row, column. `out` receives `frames` samples.
 *
 * # Safety
 * `model` must be a live handle and the buffers must hold the stated lengths.
 */
PfStatus pf_model_infer(const PfModel *model,
                        const float *clip,
                        size_t clip_len,
                        float *out,
                        size_t out_len);

/**
 * Zero-phase Butterworth band-pass of `x` into `out`, both of length `n`.
 *
 * # Safety
 * `x` and `out` must each hold `n` values. They may alias.
 */
PfStatus pf_bandpass(const double *x, size_t n, double fs, double f_lo, double f_hi, double *out);

/**
 * Heart rate in bpm by band-pass filtering, Welch PSD and peak picking,
 * with the default evaluation settings.
 *
 * # Safety
 * `x` must hold `n` values and `out_bpm` must be a valid pointer.
 */
PfStatus pf_estimate_hr(const double *x, size_t n, double fs, double *out_bpm);

/**
 * Synthetic pulse waveform at `hr_bpm`, `frames` samples at `fps`.
 *
 * # Safety
 * `out` must hold `frames` values.
 */
PfStatus pf_gen_bvp(double hr_bpm, double fps, size_t frames, uint64_t seed, double *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PULSEFORGE_H */
