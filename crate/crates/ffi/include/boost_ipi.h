#ifndef BOOST_IPI_H
#define BOOST_IPI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BipMode {
  BIP_MODE_CCM = 0,
  BIP_MODE_DCM = 1,
} BipMode;

typedef enum BipStatus {
  BIP_STATUS_OK = 0,
  BIP_STATUS_NULL_POINTER = 1,
  BIP_STATUS_INVALID_ARGUMENT = 2,
  BIP_STATUS_PARSE = 3,
  BIP_STATUS_SIMULATION = 4,
  BIP_STATUS_IO = 5,
  BIP_STATUS_OUT_OF_RANGE = 6,
  BIP_STATUS_PANIC = 7,
} BipStatus;

// Opaque i-PI controller.
typedef struct BipController BipController;

// Opaque simulation scenario.
typedef struct BipScenario BipScenario;

// Opaque closed-loop time series.
typedef struct BipSeries BipSeries;

typedef struct BipIpiConfig {
  double alpha;
  double kp;
  double ki;
  double tc;
  double u_min;
  double u_max;
  // 0 disables the output filter.
  uint32_t filter_window;
} BipIpiConfig;

typedef struct BipBoostParams {
  double inductance;
  double capacitance;
  double resistance;
  double input_voltage;
  double switching_frequency;
} BipBoostParams;

typedef struct BipDerivative {
  double di_l;
  double dv_c;
  enum BipMode mode;
} BipDerivative;

typedef struct BipRecord {
  double t;
  double v_ref;
  double v_out;
  double i_l;
  double duty;
  enum BipMode mode;
  double r;
} BipRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message on this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t bip_last_error(char *buf, uintptr_t len);

// Static description of a status code.
const char *bip_status_str(enum BipStatus status);

// # Safety
// `out` must be null or valid for writes.
enum BipStatus bip_ipi_config_default(struct BipIpiConfig *out);

// # Safety
// `out` must be null or valid for writes.
enum BipStatus bip_boost_params_default(struct BipBoostParams *out);

// Creates a controller with flooded histories. Free with [`bip_controller_free`].
//
// # Safety
// `config` must be null or valid for reads; `out` null or valid for writes.
enum BipStatus bip_controller_new(const struct BipIpiConfig *config,
                                  double y0,
                                  double yref0,
                                  double u0,
                                  struct BipController **out);

// Feeds one output sample and reference, writing the clamped duty.
//
// # Safety
// `controller` must come from [`bip_controller_new`]; `duty` null or valid for writes.
enum BipStatus bip_controller_step(struct BipController *controller,
                                   double y,
                                   double y_ref,
                                   double *duty);

// # Safety
// `controller` must come from [`bip_controller_new`]; `out` null or valid for writes.
enum BipStatus bip_controller_integral(const struct BipController *controller, double *out);

// # Safety
// `controller` must be null or come from [`bip_controller_new`], and not be used afterwards.
void bip_controller_free(struct BipController *controller);

// Averaged-model state derivative at `(i_l, v_c)` under duty `d1`.
//
// # Safety
// `params` must be null or valid for reads; `out` null or valid for writes.
enum BipStatus bip_averaged_dynamics(const struct BipBoostParams *params,
                                     double i_l,
                                     double v_c,
                                     double d1,
                                     struct BipDerivative *out);

// Parses scenario text. Free with [`bip_scenario_free`].
//
// # Safety
// `text` must be null or a NUL-terminated string; `out` null or valid for writes.
enum BipStatus bip_scenario_parse(const char *text, struct BipScenario **out);

// Loads a built-in preset (`fig2` .. `fig5`). Free with [`bip_scenario_free`].
//
// # Safety
// `name` must be null or a NUL-terminated string; `out` null or valid for writes.
enum BipStatus bip_scenario_preset(const char *name, struct BipScenario **out);

// # Safety
// `scenario` must be null or come from a scenario constructor, and not be used afterwards.
void bip_scenario_free(struct BipScenario *scenario);

// Runs the closed loop. Free the result with [`bip_series_free`].
//
// # Safety
// `scenario` must come from a scenario constructor; `out` null or valid for writes.
enum BipStatus bip_run_closed_loop(const struct BipScenario *scenario, struct BipSeries **out);

// Number of records, 0 for a null handle.
//
// # Safety
// `series` must be null or come from [`bip_run_closed_loop`].
uintptr_t bip_series_len(const struct BipSeries *series);

// # Safety
// `series` must come from [`bip_run_closed_loop`]; `out` null or valid for writes.
enum BipStatus bip_series_get(const struct BipSeries *series,
                              uintptr_t index,
                              struct BipRecord *out);

// Writes the series as CSV to `path`.
//
// # Safety
// `series` must come from [`bip_run_closed_loop`]; `path` null or a NUL-terminated string.
enum BipStatus bip_series_write_csv(const struct BipSeries *series, const char *path);

// # Safety
// `series` must be null or come from [`bip_run_closed_loop`], and not be used afterwards.
void bip_series_free(struct BipSeries *series);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOOST_IPI_H */
