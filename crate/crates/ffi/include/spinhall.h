#ifndef SPINHALL_H
#define SPINHALL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ShStatus {
  SH_STATUS_OK = 0,
  SH_STATUS_NULL_POINTER = 1,
  SH_STATUS_CONFIG = 2,
  SH_STATUS_INTEGRATION = 3,
  SH_STATUS_VERIFICATION = 4,
  SH_STATUS_IO = 5,
  SH_STATUS_INVALID_ARGUMENT = 6,
  SH_STATUS_PANIC = 7,
} ShStatus;

/**
 * Parsed scenario together with its medium.
 */
typedef struct ShScenario ShScenario;

/**
 * Sampled beam trajectory.
 */
typedef struct ShTrajectory ShTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next call on this thread.
 */
const char *sh_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sh_version(void);

/**
 * Parses a JSON scenario document.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum ShStatus sh_scenario_from_json(const char *json, struct ShScenario **out);

/**
 * The default scenario.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ShStatus sh_scenario_default(struct ShScenario **out);

/**
 * # Safety
 * `sc` must come from a scenario constructor and not be used afterwards. NULL is ignored.
 */
void sh_scenario_free(struct ShScenario *sc);

/**
 * Replaces ω and the helicity s of the beam.
 *
 * # Safety
 * `sc` must be a live scenario handle.
 */
enum ShStatus sh_scenario_set_beam(struct ShScenario *sc, double omega, double s);

/**
 * Integrates the beam and samples it every `integration.sample_stride`.
 *
 * # Safety
 * `sc` must be a live scenario handle and `out` a valid pointer.
 */
enum ShStatus sh_integrate_beam(const struct ShScenario *sc, struct ShTrajectory **out);

/**
 * # Safety
 * `tr` must come from [`sh_integrate_beam`] and not be used afterwards. NULL is ignored.
 */
void sh_trajectory_free(struct ShTrajectory *tr);

/**
 * Number of samples, 0 for NULL.
 *
 * # Safety
 * `tr` must be NULL or a live trajectory handle.
 */
size_t sh_trajectory_len(const struct ShTrajectory *tr);

/**
 * Total energy of the beam, NaN for NULL.
 *
 * # Safety
 * `tr` must be NULL or a live trajectory handle.
 */
double sh_trajectory_energy(const struct ShTrajectory *tr);

/**
 * Number of values per sample (the trajectory CSV columns).
 */
size_t sh_trajectory_columns(void);

/**
 * Name of column `i` as a static NUL-terminated string, or NULL when out of range.
 */
const char *sh_trajectory_column_name(size_t i);

/**
 * Copies sample `i` into `out`, which must hold [`sh_trajectory_columns`] doubles.
 *
 * # Safety
 * `tr` must be a live trajectory handle and `out` must point to enough writable doubles.
 */
enum ShStatus sh_trajectory_row(const struct ShTrajectory *tr, size_t i, double *out);

/**
 * Runs both helicities (the scenario's s is replaced by ±1) and reports X₊(T) − X₋(T), the largest
 * distance of the s = +1 centroid from the ray, and the mid-slab drift cosine.
 *
 * # Safety
 * `sc` must be a live scenario handle; `sep` must point to 3 writable doubles; the other outputs may be NULL.
 */
enum ShStatus sh_spin_hall_pair(const struct ShScenario *sc,
                                double *sep,
                                double *geo_dev_sup,
                                double *mid_cos_angle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINHALL_H */
