#ifndef VARRED_NLS_H
#define VARRED_NLS_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values 2 to 4 coincide with the command-line exit codes.
 */
typedef enum {
  VN_STATUS_OK = 0,
  VN_STATUS_FAILURE = 1,
  VN_STATUS_HYPOTHESIS = 2,
  VN_STATUS_NON_CONVERGENCE = 3,
  VN_STATUS_CERTIFICATE = 4,
  VN_STATUS_INVALID_ARGUMENT = 5,
  VN_STATUS_CONFIG = 6,
  VN_STATUS_IO = 7,
  VN_STATUS_PANIC = 8,
} VnStatus;

/**
 * Run configuration.
 */
typedef struct VnConfig VnConfig;

/**
 * Ground state of the limit problem on the configured grid.
 */
typedef struct VnGroundState VnGroundState;

/**
 * Result of the full pipeline.
 */
typedef struct VnReport VnReport;

/**
 * One row of the scaling scan.
 */
typedef struct {
  double eps;
  double psi;
  double eta;
  double lambda;
  double residual;
  double distance;
  double orbit_distance;
} VnScanRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. Valid until the next failing call.
 */
const char *vn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vn_version(void);

/**
 * Built-in default configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
VnStatus vn_config_default(VnConfig **out);

/**
 * Parse a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
VnStatus vn_config_from_toml(const char *toml, VnConfig **out);

/**
 * Override the random seed.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
VnStatus vn_config_set_seed(VnConfig *cfg, uint64_t seed);

/**
 * Release a configuration; null is ignored.
 *
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void vn_config_free(VnConfig *cfg);

/**
 * Check the analytic hypotheses. Returns `VN_STATUS_HYPOTHESIS` on violation.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
VnStatus vn_validate(const VnConfig *cfg);

/**
 * Validate and compute the ground state.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
VnStatus vn_ground_state_solve(const VnConfig *cfg, VnGroundState **out);

/**
 * Energy of the ground state, NaN for a null handle.
 *
 * # Safety
 * `gs` must be null or a live handle.
 */
double vn_ground_state_energy(const VnGroundState *gs);

/**
 * Squared `L^2` norm of the ground state, NaN for a null handle.
 *
 * # Safety
 * `gs` must be null or a live handle.
 */
double vn_ground_state_l2_norm_sq(const VnGroundState *gs);

/**
 * Number of grid values, 0 for a null handle.
 *
 * # Safety
 * `gs` must be null or a live handle.
 */
uintptr_t vn_ground_state_len(const VnGroundState *gs);

/**
 * Copy the grid values (row-major, last axis fastest) into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `gs` must be a live handle and `buf` valid for `len` writes.
 */
VnStatus vn_ground_state_copy(const VnGroundState *gs, double *buf, uintptr_t len);

/**
 * Release a ground state; null is ignored.
 *
 * # Safety
 * `gs` must be null or a handle not yet freed.
 */
void vn_ground_state_free(VnGroundState *gs);

/**
 * Run the full pipeline; artifacts are written to `out_dir` unless it is null.
 *
 * A report is produced even when certificates fail; check [`vn_report_all_passed`].
 *
 * # Safety
 * `cfg` must be a live handle, `out_dir` null or a NUL-terminated path, `out` a valid pointer.
 */
VnStatus vn_pipeline_run(const VnConfig *cfg, const char *out_dir, VnReport **out);

/**
 * 1 when every certificate passed, 0 otherwise or for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
int32_t vn_report_all_passed(const VnReport *report);

/**
 * Number of scan rows, 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
uintptr_t vn_report_scan_len(const VnReport *report);

/**
 * Copy scan row `index` into `row`.
 *
 * # Safety
 * `report` must be a live handle and `row` a valid pointer.
 */
VnStatus vn_report_scan_row(const VnReport *report, uintptr_t index, VnScanRow *row);

/**
 * Report as a JSON string; release it with [`vn_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
VnStatus vn_report_json(const VnReport *report, char **out);

/**
 * Release a report; null is ignored.
 *
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void vn_report_free(VnReport *report);

/**
 * Release a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void vn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VARRED_NLS_H */
