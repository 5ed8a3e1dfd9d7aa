#ifndef REACHSEG_H
#define REACHSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum ReachsegStatus {
  REACHSEG_STATUS_OK = 0,
  REACHSEG_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument: malformed text, non-finite number, degenerate polygon.
   */
  REACHSEG_STATUS_INVALID_INPUT = 2,
  /**
   * Input violates a checker precondition (e.g. vertex spacing).
   */
  REACHSEG_STATUS_PRECONDITION = 3,
  REACHSEG_STATUS_IO = 4,
  /**
   * The optimizer could not produce a result.
   */
  REACHSEG_STATUS_OPTIMIZER = 5,
  REACHSEG_STATUS_PANIC = 6,
} ReachsegStatus;

/**
 * A grayscale image on a rectangular pixel grid.
 */
typedef struct ReachsegImage ReachsegImage;

/**
 * A region with optional holes.
 */
typedef struct ReachsegRegion ReachsegRegion;

/**
 * Summary of a ball-condition check.
 */
typedef struct ReachsegCheck {
  bool pass;
  /**
   * Largest `-margin` over all vertices, clamped at 0.
   */
  double worst_violation;
  size_t vertices;
} ReachsegCheck;

/**
 * Weights of the functional and the curvature penalty `phi(k) = 1 + |k|^p`.
 */
typedef struct ReachsegParams {
  double alpha;
  double beta;
  double gamma;
  double radius;
  double phi_exponent;
} ReachsegParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *reachseg_last_error(void);

/**
 * Parses a region document: `{"outer": [[x, y], ...], "holes": [...]}`.
 * Arrays of documents are rejected here; use one call per region.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum ReachsegStatus reachseg_region_from_json(const char *json, struct ReachsegRegion **out);

/**
 * Builds a hole-free region from `n` interleaved `x, y` pairs. Clockwise
 * input is reoriented.
 *
 * # Safety
 * `xy` must point to `2 * n` doubles; `out` must be writable.
 */
enum ReachsegStatus reachseg_region_from_vertices(const double *xy,
                                                  size_t n,
                                                  struct ReachsegRegion **out);

/**
 * # Safety
 * `region` must be null or a handle from this library not yet freed.
 */
void reachseg_region_free(struct ReachsegRegion *region);

/**
 * # Safety
 * `region` must be a live handle; `area` must be writable.
 */
enum ReachsegStatus reachseg_region_area(const struct ReachsegRegion *region, double *area);

/**
 * # Safety
 * `region` must be a live handle; `perimeter` must be writable.
 */
enum ReachsegStatus reachseg_region_perimeter(const struct ReachsegRegion *region,
                                              double *perimeter);

/**
 * Discrete `∫ phi(k) ds` over every boundary curve, `phi(k) = 1 + |k|^p`.
 *
 * # Safety
 * `region` must be a live handle; `energy` must be writable.
 */
enum ReachsegStatus reachseg_region_curvature_energy(const struct ReachsegRegion *region,
                                                     double phi_exponent,
                                                     double *energy);

/**
 * Interior/exterior ball test of `n` regions at radius `radius`. Pass
 * `tol < 0` for the default tolerance. Edges longer than `radius / 8` give
 * `Precondition`.
 *
 * # Safety
 * `regions` must point to `n` live handles; `result` must be writable.
 */
enum ReachsegStatus reachseg_check(const struct ReachsegRegion *const *regions,
                                   size_t n,
                                   double radius,
                                   double tol,
                                   struct ReachsegCheck *result);

/**
 * Serializes `n` regions as a JSON array. Release with
 * [`reachseg_string_free`].
 *
 * # Safety
 * `regions` must point to `n` live handles; `json` must be writable.
 */
enum ReachsegStatus reachseg_regions_to_json(const struct ReachsegRegion *const *regions,
                                             size_t n,
                                             char **json);

/**
 * Builds an image from row-major samples, row 0 at `origin_y`.
 *
 * # Safety
 * `values` must point to `width * height` doubles; `out` must be writable.
 */
enum ReachsegStatus reachseg_image_from_values(size_t width,
                                               size_t height,
                                               double pixel_size,
                                               double origin_x,
                                               double origin_y,
                                               const double *values,
                                               struct ReachsegImage **out);

/**
 * Reads a P2 or P5 file; samples are scaled to `[0, 1]`.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum ReachsegStatus reachseg_image_read_pgm(const char *path,
                                            double pixel_size,
                                            double origin_x,
                                            double origin_y,
                                            struct ReachsegImage **out);

/**
 * # Safety
 * `image` must be null or a handle from this library not yet freed.
 */
void reachseg_image_free(struct ReachsegImage *image);

/**
 * # Safety
 * `image` must be a live handle; outputs must be writable.
 */
enum ReachsegStatus reachseg_image_size(const struct ReachsegImage *image,
                                        size_t *width,
                                        size_t *height);

/**
 * Evaluates the functional for `n` layers (index 0 frontmost). `g` receives
 * the total; `json`, if non-null, receives the per-term breakdown.
 *
 * # Safety
 * `image` must be live, `layers` must point to `n` live handles, `params`
 * and `g` must be valid; `json` may be null.
 */
enum ReachsegStatus reachseg_energy(const struct ReachsegImage *image,
                                    const struct ReachsegRegion *const *layers,
                                    size_t n,
                                    const struct ReachsegParams *params,
                                    double *g,
                                    char **json);

/**
 * Runs the annealer. `k = 0` lets the layer count vary; otherwise at most
 * `k` layers. `iterations = 0` keeps the default schedule length. On
 * success `json` receives `{"G": .., "feasible": .., "layers": [..]}`.
 *
 * # Safety
 * `image` and `params` must be valid; `json` must be writable.
 */
enum ReachsegStatus reachseg_segment(const struct ReachsegImage *image,
                                     const struct ReachsegParams *params,
                                     size_t k,
                                     size_t iterations,
                                     uint64_t seed,
                                     char **json);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void reachseg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REACHSEG_H */
