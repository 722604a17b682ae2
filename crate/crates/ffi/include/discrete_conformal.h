#ifndef DISCRETE_CONFORMAL_H
#define DISCRETE_CONFORMAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_ARGUMENT = 2,
  DC_STATUS_IO = 3,
  DC_STATUS_NUMERICAL = 4,
  DC_STATUS_PANIC = 5,
} DcStatus;

/**
 * Area-ratio weighting of the cotangent weights.
 */
typedef enum DcRho {
  DC_RHO_UNIT = 0,
  DC_RHO_ANALYTIC = 1,
  DC_RHO_QUADRATURE = 2,
} DcRho;

/**
 * Opaque mesh handle.
 */
typedef struct DcMesh DcMesh;

typedef struct DcEnergy {
  double dirichlet;
  double area;
  double conformal;
} DcEnergy;

typedef struct DcSolveOptions {
  size_t max_iterations;
  double gradient_tolerance;
  double relative_tolerance;
  enum DcRho rho;
  /**
   * Degree of the triangle rule when `rho` is `Quadrature`.
   */
  size_t quadrature_degree;
} DcSolveOptions;

typedef struct DcSolveSummary {
  size_t iterations;
  bool converged;
  size_t folds;
  struct DcEnergy energy;
  /**
   * Relative error against the exact map on generated hemispheres, NaN otherwise.
   */
  double relative_error;
} DcSolveSummary;

typedef struct DcQuality {
  double max_d_over_sin;
  double max_d_over_r;
  double h;
  size_t flagged;
} DcQuality;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. Valid until the next failing call.
 */
const char *dc_last_error(void);

/**
 * Hemisphere with `n` latitude rows and `m` longitude columns.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum DcStatus dc_mesh_hemisphere(size_t n, size_t m, struct DcMesh **out);

/**
 * Hemisphere with `m = max(3, floor(n^r))`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum DcStatus dc_mesh_hemisphere_exponent(size_t n, double r, struct DcMesh **out);

/**
 * Planar unit disk with `rings` concentric rings.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum DcStatus dc_mesh_disk(size_t rings, struct DcMesh **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DcStatus dc_mesh_load_off(const char *path, struct DcMesh **out);

/**
 * # Safety
 * `mesh` must come from a `dc_mesh_*` constructor; `path` must be NUL-terminated.
 */
enum DcStatus dc_mesh_save_off(const struct DcMesh *mesh, const char *path);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `mesh` must come from a `dc_mesh_*` constructor and must not be used afterwards.
 */
void dc_mesh_free(struct DcMesh *mesh);

/**
 * Number of vertices; 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t dc_mesh_vertex_count(const struct DcMesh *mesh);

/**
 * Number of faces; 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t dc_mesh_face_count(const struct DcMesh *mesh);

/**
 * Copies vertex coordinates as `x, y, z` triples into `out` of length `len >= 3 * vertices`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum DcStatus dc_mesh_vertices(const struct DcMesh *mesh, double *out, size_t len);

/**
 * Copies face vertex indices as triples into `out` of length `len >= 3 * faces`.
 *
 * # Safety
 * `out` must point to `len` writable `size_t` values.
 */
enum DcStatus dc_mesh_faces(const struct DcMesh *mesh, size_t *out, size_t len);

/**
 * Conformal energy of a map given as `x, y` pairs per vertex (`len = 2 * vertices`).
 *
 * # Safety
 * `map` must point to `len` doubles and `out` to a writable `DcEnergy`.
 */
enum DcStatus dc_conformal_energy(const struct DcMesh *mesh,
                                  enum DcRho rho,
                                  size_t quadrature_degree,
                                  const double *map,
                                  size_t len,
                                  struct DcEnergy *out);

/**
 * Library defaults for [`dc_solve`].
 */
struct DcSolveOptions dc_solve_options_default(void);

/**
 * Minimises the conformal energy and writes the map as `x, y` pairs into `map_out`.
 *
 * Hemispheres start from the harmonic map with the source at the pole, planar meshes from their
 * own positions. Returns `Numerical` with the summary filled in when the minimiser does not
 * converge.
 *
 * # Safety
 * `options` may be null (defaults); `map_out` must hold `len >= 2 * vertices` doubles and
 * `summary` may be null.
 */
enum DcStatus dc_solve(const struct DcMesh *mesh,
                       const struct DcSolveOptions *options,
                       double *map_out,
                       size_t len,
                       struct DcSolveSummary *summary);

/**
 * Quality maxima and the number of faces flagged by the degradation scan with default thresholds.
 *
 * # Safety
 * `out` must point to a writable `DcQuality`.
 */
enum DcStatus dc_quality(const struct DcMesh *mesh, struct DcQuality *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISCRETE_CONFORMAL_H */
