#ifndef SHAPEFORGE_H
#define SHAPEFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_CONFIG = 3,
  SF_STATUS_IO = 4,
  SF_STATUS_MESH = 5,
  SF_STATUS_SOLVER = 6,
  SF_STATUS_BUFFER_TOO_SMALL = 7,
  SF_STATUS_PANIC = 8,
} SfStatus;

typedef struct SfConfig SfConfig;

typedef struct SfMesh SfMesh;

typedef struct SfRun SfRun;

/**
 * Scalar results of a finished run.
 */
typedef struct SfSummary {
  double j_aug;
  double j;
  double g_def_norm;
  double min_det;
  size_t inverted;
  size_t steps;
  size_t outer_iterations;
  bool converged;
  /**
   * True when a solver stage stopped the run early.
   */
  bool failed;
} SfSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static storage.
 */
const char *sf_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *sf_last_error(void);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum SfStatus sf_config_default(struct SfConfig **out);

/**
 * # Safety
 * `path` must be a nul-terminated string, `out` a valid pointer.
 */
enum SfStatus sf_config_from_file(const char *path, struct SfConfig **out);

/**
 * Sets one `key = value` entry and revalidates. Relative paths resolve
 * against the working directory.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` nul-terminated.
 */
enum SfStatus sf_config_set(struct SfConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must come from this library or be null.
 */
void sf_config_free(struct SfConfig *cfg);

/**
 * Finest mesh of the hierarchy described by `cfg`.
 *
 * # Safety
 * `cfg` must come from this library, `out` a valid pointer.
 */
enum SfStatus sf_mesh_build(const struct SfConfig *cfg, struct SfMesh **out);

/**
 * # Safety
 * `mesh` must come from this library; `vertices` and `triangles` may be null.
 */
enum SfStatus sf_mesh_counts(const struct SfMesh *mesh, size_t *vertices, size_t *triangles);

/**
 * Interleaved vertex coordinates. `needed` receives 2·nv; pass a null
 * buffer with `len = 0` to query the size.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum SfStatus sf_mesh_vertices(const struct SfMesh *mesh, double *buf, size_t len, size_t *needed);

/**
 * # Safety
 * `mesh` must come from this library or be null.
 */
void sf_mesh_free(struct SfMesh *mesh);

/**
 * Runs the optimization and writes its artifacts to the configured
 * output directory.
 *
 * # Safety
 * `cfg` must come from this library, `out` a valid pointer.
 */
enum SfStatus sf_run(const struct SfConfig *cfg, struct SfRun **out);

/**
 * # Safety
 * `run` must come from this library, `out` a valid pointer.
 */
enum SfStatus sf_run_summary(const struct SfRun *run, struct SfSummary *out);

/**
 * Final displacement w, interleaved per finest-level vertex.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum SfStatus sf_run_displacement(const struct SfRun *run, double *buf, size_t len, size_t *needed);

/**
 * Final η, one value per finest-level vertex.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum SfStatus sf_run_eta(const struct SfRun *run, double *buf, size_t len, size_t *needed);

/**
 * # Safety
 * `run` must come from this library or be null.
 */
void sf_run_free(struct SfRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHAPEFORGE_H */
