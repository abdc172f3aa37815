#ifndef SPLATKIT_H
#define SPLATKIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SplatkitStatus {
  SPLATKIT_STATUS_OK = 0,
  SPLATKIT_STATUS_NULL_POINTER = 1,
  SPLATKIT_STATUS_INVALID_ARGUMENT = 2,
  SPLATKIT_STATUS_SHAPE_MISMATCH = 3,
  SPLATKIT_STATUS_IO = 4,
  SPLATKIT_STATUS_FORMAT = 5,
  SPLATKIT_STATUS_PANIC = 6,
} SplatkitStatus;

typedef enum SplatkitKernel {
  SPLATKIT_KERNEL_BILINEAR = 0,
  SPLATKIT_KERNEL_GAUSSIAN = 1,
} SplatkitKernel;

// Opaque image or flow handle.
typedef struct SplatkitGrid SplatkitGrid;

// Synthesis settings. Obtain defaults from [`splatkit_config_default`].
typedef struct SplatkitConfig {
  // A [`SplatkitKernel`] value; anything else is rejected.
  uint32_t kernel;
  // Gaussian standard deviation in pixels; ignored for bilinear.
  float sigma;
  // Splat alphas for the photo, flow and variance terms.
  float splat_alphas[3];
  // Merge alphas for the photo, flow and variance terms.
  float merge_alphas[3];
  // Splat weights at or below this are holes.
  float eps_valid;
  // Run scatter passes sequentially for reproducible output.
  bool deterministic;
} SplatkitConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default settings: Gaussian kernel with sigma 1, all alphas 1.
struct SplatkitConfig splatkit_config_default(void);

// Message for the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on this thread.
const char *splatkit_last_error_message(void);

// Library version as a static nul-terminated string.
const char *splatkit_version(void);

// Creates a grid, copying `height * width * channels` floats from `data`,
// or zero-filled when `data` is null.
//
// # Safety
// `data` must be null or point to that many readable floats; `out` must be
// writable.
enum SplatkitStatus splatkit_grid_new(size_t height,
                                      size_t width,
                                      size_t channels,
                                      const float *data,
                                      struct SplatkitGrid **out);

// Releases a grid. Null is ignored.
//
// # Safety
// `grid` must be null or a handle from this library not yet freed.
void splatkit_grid_free(struct SplatkitGrid *grid);

// Writes the grid dimensions to any non-null output pointer.
//
// # Safety
// `grid` must be a live handle; non-null outputs must be writable.
enum SplatkitStatus splatkit_grid_shape(const struct SplatkitGrid *grid,
                                        size_t *height,
                                        size_t *width,
                                        size_t *channels);

// Borrowed pointer to the grid's row-major data, valid until the grid is
// freed. Null for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
const float *splatkit_grid_data(const struct SplatkitGrid *grid);

// Copies the grid's data into `dst`, which must hold exactly `len` floats.
//
// # Safety
// `grid` must be a live handle and `dst` must have room for `len` floats.
enum SplatkitStatus splatkit_grid_copy(const struct SplatkitGrid *grid, float *dst, size_t len);

// Reads a PNG (values scaled to [0, 1]) or PFM image.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum SplatkitStatus splatkit_read_image(const char *path, struct SplatkitGrid **out);

// Writes a PNG or PFM image chosen by the file extension.
//
// # Safety
// `grid` must be a live handle and `path` a nul-terminated string.
enum SplatkitStatus splatkit_write_image(const struct SplatkitGrid *grid, const char *path);

// Reads a Middlebury `.flo` file into a 2-channel grid.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum SplatkitStatus splatkit_read_flo(const char *path, struct SplatkitGrid **out);

// Writes a 2-channel grid as a Middlebury `.flo` file.
//
// # Safety
// `flow` must be a live handle and `path` a nul-terminated string.
enum SplatkitStatus splatkit_write_flo(const struct SplatkitGrid *flow, const char *path);

// Synthesizes the frame at time `t` in [0, 1]. A null `config` means defaults.
//
// # Safety
// All handles must be live, `config` null or readable, `out` writable.
enum SplatkitStatus splatkit_synthesize(const struct SplatkitGrid *i0,
                                        const struct SplatkitGrid *i1,
                                        const struct SplatkitGrid *f01,
                                        const struct SplatkitGrid *f10,
                                        float t,
                                        const struct SplatkitConfig *config,
                                        struct SplatkitGrid **out);

// Synthesizes `count` frames, computing the reliability metrics once.
// `outs` receives `count` new handles; on failure none are written.
//
// # Safety
// All handles must be live, `times` must hold `count` floats, `config` must
// be null or readable and `outs` must have room for `count` handles.
enum SplatkitStatus splatkit_synthesize_multi(const struct SplatkitGrid *i0,
                                              const struct SplatkitGrid *i1,
                                              const struct SplatkitGrid *f01,
                                              const struct SplatkitGrid *f10,
                                              const float *times,
                                              size_t count,
                                              const struct SplatkitConfig *config,
                                              struct SplatkitGrid **outs);

// PSNR in dB with the given peak value; infinity for identical grids.
//
// # Safety
// Both handles must be live and `out` writable.
enum SplatkitStatus splatkit_psnr(const struct SplatkitGrid *a,
                                  const struct SplatkitGrid *b,
                                  double peak,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLATKIT_H */
