#ifndef FILAMENT_H
#define FILAMENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of an FFI call.
typedef enum FlmStatus {
  FLM_STATUS_OK = 0,
  FLM_STATUS_NULL_POINTER = 1,
  // Out-of-range coordinate or parameter.
  FLM_STATUS_INVALID_ARGUMENT = 2,
  FLM_STATUS_DEGENERATE_DATA = 3,
  // Missing file, missing column or malformed CSV.
  FLM_STATUS_INGEST = 4,
  FLM_STATUS_IO = 5,
  FLM_STATUS_INTERNAL = 6,
  // A Rust panic was caught at the boundary.
  FLM_STATUS_PANIC = 7,
} FlmStatus;

// Opaque kernel density model.
typedef struct FlmModel FlmModel;

// Opaque set of input points.
typedef struct FlmPoints FlmPoints;

// Opaque ridge estimation result.
typedef struct FlmRidges FlmRidges;

// Ridge estimation parameters. Obtain defaults from
// [`flm_scms_config_default`] and adjust fields as needed.
typedef struct FlmScmsConfig {
  size_t neighbors;
  // Fixed bandwidth in radians; 0 selects the k-NN estimate.
  double bandwidth_radians;
  // Per-point convergence threshold in degrees.
  double convergence_degrees;
  // Top-percent density cut; negative disables it.
  double percentage;
  // 0 uses one mesh point per data point.
  size_t mesh_size;
  double threshold_quantile;
  size_t max_iterations;
  uint64_t seed;
} FlmScmsConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failed call on this thread, or NULL.
// The string stays valid until the next call into this library.
const char *flm_last_error_message(void);

// Great-circle distance in miles between two points given in degrees.
//
// # Safety
// `out_miles` must be valid for writes.
enum FlmStatus flm_haversine_miles(double lat_a,
                                   double lon_a,
                                   double lat_b,
                                   double lon_b,
                                   double *out_miles);

// Builds a point set from parallel latitude/longitude arrays in degrees.
//
// # Safety
// `lat` and `lon` must each point to `n` readable doubles; `out` must be
// valid for writes.
enum FlmStatus flm_points_new(const double *lat,
                              const double *lon,
                              size_t n,
                              struct FlmPoints **out);

// Loads `Latitude`/`Longitude` columns from a CSV file. When `part1_only`
// is nonzero, rows are restricted to Part I offense types read from the
// `Primary Type` column.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
enum FlmStatus flm_points_load_csv(const char *path, int32_t part1_only, struct FlmPoints **out);

// Number of points, or 0 for NULL.
//
// # Safety
// `points` must be NULL or a live handle.
size_t flm_points_len(const struct FlmPoints *points);

// # Safety
// `points` must be NULL or a handle not yet freed.
void flm_points_free(struct FlmPoints *points);

// k-nearest-neighbor bandwidth in radians.
//
// # Safety
// `points` must be a live handle; `out_radians` must be valid for writes.
enum FlmStatus flm_knn_bandwidth(const struct FlmPoints *points, size_t k, double *out_radians);

// Density model over a copy of `points` with the given bandwidth.
//
// # Safety
// `points` must be a live handle; `out` must be valid for writes.
enum FlmStatus flm_model_new(const struct FlmPoints *points,
                             double bandwidth_radians,
                             struct FlmModel **out);

// Kernel density at a point given in degrees.
//
// # Safety
// `model` must be a live handle; `out_density` must be valid for writes.
enum FlmStatus flm_model_density(const struct FlmModel *model,
                                 double lat,
                                 double lon,
                                 double *out_density);

// # Safety
// `model` must be NULL or a handle not yet freed.
void flm_model_free(struct FlmModel *model);

// Default estimation parameters.
struct FlmScmsConfig flm_scms_config_default(void);

// Runs ridge estimation. A NULL `config` uses the defaults.
//
// # Safety
// `points` must be a live handle, `config` NULL or readable, `out` valid
// for writes.
enum FlmStatus flm_scms_run(const struct FlmPoints *points,
                            const struct FlmScmsConfig *config,
                            struct FlmRidges **out);

// Number of ridge points, or 0 for NULL.
//
// # Safety
// `ridges` must be NULL or a live handle.
size_t flm_ridges_len(const struct FlmRidges *ridges);

// Sweeps executed by the estimation, or 0 for NULL.
//
// # Safety
// `ridges` must be NULL or a live handle.
size_t flm_ridges_iterations(const struct FlmRidges *ridges);

// Bandwidth the estimation used, in radians; 0 for NULL.
//
// # Safety
// `ridges` must be NULL or a live handle.
double flm_ridges_bandwidth(const struct FlmRidges *ridges);

// Copies up to `capacity` ridge points (degrees) and densities into the
// caller's arrays and stores the number copied in `out_written`. Any of
// the three arrays may be NULL to skip it.
//
// # Safety
// Non-NULL arrays must hold `capacity` writable doubles.
enum FlmStatus flm_ridges_copy(const struct FlmRidges *ridges,
                               double *lat,
                               double *lon,
                               double *density,
                               size_t capacity,
                               size_t *out_written);

// # Safety
// `ridges` must be NULL or a handle not yet freed.
void flm_ridges_free(struct FlmRidges *ridges);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FILAMENT_H */
