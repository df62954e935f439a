//! C ABI over `boost_ipi`.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free` function. Every fallible call returns a [`BipStatus`]; the message
//! for the most recent failure on the calling thread is available through
//! [`bip_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use boost_ipi::plant::averaged_dynamics;
use boost_ipi::{
    BoostParams, ConductionMode, ControllerState, Error, IpiConfig, PlantState, Scenario,
    TimeSeriesRecord,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BipStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Simulation = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BipMode {
    Ccm = 0,
    Dcm = 1,
}

impl From<ConductionMode> for BipMode {
    fn from(mode: ConductionMode) -> Self {
        match mode {
            ConductionMode::Ccm => BipMode::Ccm,
            ConductionMode::Dcm => BipMode::Dcm,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipIpiConfig {
    pub alpha: f64,
    pub kp: f64,
    pub ki: f64,
    pub tc: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// 0 disables the output filter.
    pub filter_window: u32,
}

impl From<BipIpiConfig> for IpiConfig {
    fn from(c: BipIpiConfig) -> Self {
        IpiConfig {
            alpha: c.alpha,
            kp: c.kp,
            ki: c.ki,
            tc: c.tc,
            u_min: c.u_min,
            u_max: c.u_max,
            filter_window: c.filter_window as usize,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipBoostParams {
    pub inductance: f64,
    pub capacitance: f64,
    pub resistance: f64,
    pub input_voltage: f64,
    pub switching_frequency: f64,
}

impl From<BipBoostParams> for BoostParams {
    fn from(p: BipBoostParams) -> Self {
        BoostParams {
            inductance: p.inductance,
            capacitance: p.capacitance,
            resistance: p.resistance,
            input_voltage: p.input_voltage,
            switching_frequency: p.switching_frequency,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipDerivative {
    pub di_l: f64,
    pub dv_c: f64,
    pub mode: BipMode,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipRecord {
    pub t: f64,
    pub v_ref: f64,
    pub v_out: f64,
    pub i_l: f64,
    pub duty: f64,
    pub mode: BipMode,
    pub r: f64,
}

impl From<&TimeSeriesRecord> for BipRecord {
    fn from(r: &TimeSeriesRecord) -> Self {
        BipRecord {
            t: r.t,
            v_ref: r.v_ref,
            v_out: r.v_out,
            i_l: r.i_l,
            duty: r.duty,
            mode: r.mode.into(),
            r: r.r,
        }
    }
}

/// Opaque i-PI controller.
pub struct BipController {
    config: IpiConfig,
    state: ControllerState,
}

/// Opaque simulation scenario.
pub struct BipScenario(Scenario);

/// Opaque closed-loop time series.
pub struct BipSeries(Vec<TimeSeriesRecord>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(BipStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let status = match err {
            Error::InvalidArgument(_) | Error::NonFinite(_) => BipStatus::InvalidArgument,
            Error::Diverged { .. } => BipStatus::Simulation,
            Error::Parse { .. } | Error::UnknownPreset(_) => BipStatus::Parse,
            Error::Io(_) => BipStatus::Io,
        };
        Failure(status, err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BipStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BipStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".to_string());
        Err(Failure(BipStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            BipStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(BipStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bip_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn bip_status_str(status: BipStatus) -> *const c_char {
    let s: &'static CStr = match status {
        BipStatus::Ok => c"ok",
        BipStatus::NullPointer => c"null pointer",
        BipStatus::InvalidArgument => c"invalid argument",
        BipStatus::Parse => c"parse error",
        BipStatus::Simulation => c"simulation aborted",
        BipStatus::Io => c"i/o error",
        BipStatus::OutOfRange => c"index out of range",
        BipStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_ipi_config_default(out: *mut BipIpiConfig) -> BipStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let c = IpiConfig::default();
        *out = BipIpiConfig {
            alpha: c.alpha,
            kp: c.kp,
            ki: c.ki,
            tc: c.tc,
            u_min: c.u_min,
            u_max: c.u_max,
            filter_window: c.filter_window as u32,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_boost_params_default(out: *mut BipBoostParams) -> BipStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let p = BoostParams::default();
        *out = BipBoostParams {
            inductance: p.inductance,
            capacitance: p.capacitance,
            resistance: p.resistance,
            input_voltage: p.input_voltage,
            switching_frequency: p.switching_frequency,
        };
        Ok(())
    })
}

/// Creates a controller with flooded histories. Free with [`bip_controller_free`].
///
/// # Safety
/// `config` must be null or valid for reads; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_controller_new(
    config: *const BipIpiConfig,
    y0: f64,
    yref0: f64,
    u0: f64,
    out: *mut *mut BipController,
) -> BipStatus {
    guard(|| {
        let config: IpiConfig = (*as_ref(config, "config")?).into();
        let out = as_mut(out, "out")?;
        let state = ControllerState::new(&config, y0, yref0, u0)?;
        *out = Box::into_raw(Box::new(BipController { config, state }));
        Ok(())
    })
}

/// Feeds one output sample and reference, writing the clamped duty.
///
/// # Safety
/// `controller` must come from [`bip_controller_new`]; `duty` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_controller_step(
    controller: *mut BipController,
    y: f64,
    y_ref: f64,
    duty: *mut f64,
) -> BipStatus {
    guard(|| {
        let c = as_mut(controller, "controller")?;
        let duty = as_mut(duty, "duty")?;
        *duty = c.state.step(&c.config, y, y_ref)?;
        Ok(())
    })
}

/// # Safety
/// `controller` must come from [`bip_controller_new`]; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_controller_integral(
    controller: *const BipController,
    out: *mut f64,
) -> BipStatus {
    guard(|| {
        let c = as_ref(controller, "controller")?;
        *as_mut(out, "out")? = c.state.integral();
        Ok(())
    })
}

/// # Safety
/// `controller` must be null or come from [`bip_controller_new`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bip_controller_free(controller: *mut BipController) {
    if !controller.is_null() {
        drop(Box::from_raw(controller));
    }
}

/// Averaged-model state derivative at `(i_l, v_c)` under duty `d1`.
///
/// # Safety
/// `params` must be null or valid for reads; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_averaged_dynamics(
    params: *const BipBoostParams,
    i_l: f64,
    v_c: f64,
    d1: f64,
    out: *mut BipDerivative,
) -> BipStatus {
    guard(|| {
        let params: BoostParams = (*as_ref(params, "params")?).into();
        let out = as_mut(out, "out")?;
        let d = averaged_dynamics(&PlantState::new(i_l, v_c), d1, &params)?;
        *out = BipDerivative {
            di_l: d.di_l,
            dv_c: d.dv_c,
            mode: d.mode.into(),
        };
        Ok(())
    })
}

/// Parses scenario text. Free with [`bip_scenario_free`].
///
/// # Safety
/// `text` must be null or a NUL-terminated string; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_scenario_parse(
    text: *const c_char,
    out: *mut *mut BipScenario,
) -> BipStatus {
    guard(|| {
        let text = as_str(text, "text")?;
        let out = as_mut(out, "out")?;
        let scenario = boost_ipi::parse_scenario(text)?;
        *out = Box::into_raw(Box::new(BipScenario(scenario)));
        Ok(())
    })
}

/// Loads a built-in preset (`fig2` .. `fig5`). Free with [`bip_scenario_free`].
///
/// # Safety
/// `name` must be null or a NUL-terminated string; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_scenario_preset(
    name: *const c_char,
    out: *mut *mut BipScenario,
) -> BipStatus {
    guard(|| {
        let name = as_str(name, "name")?;
        let out = as_mut(out, "out")?;
        let scenario = boost_ipi::preset(name)?;
        *out = Box::into_raw(Box::new(BipScenario(scenario)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or come from a scenario constructor, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bip_scenario_free(scenario: *mut BipScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the closed loop. Free the result with [`bip_series_free`].
///
/// # Safety
/// `scenario` must come from a scenario constructor; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_run_closed_loop(
    scenario: *const BipScenario,
    out: *mut *mut BipSeries,
) -> BipStatus {
    guard(|| {
        let scenario = as_ref(scenario, "scenario")?;
        let out = as_mut(out, "out")?;
        let series = boost_ipi::run_closed_loop(&scenario.0)?;
        *out = Box::into_raw(Box::new(BipSeries(series)));
        Ok(())
    })
}

/// Number of records, 0 for a null handle.
///
/// # Safety
/// `series` must be null or come from [`bip_run_closed_loop`].
#[no_mangle]
pub unsafe extern "C" fn bip_series_len(series: *const BipSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `series` must come from [`bip_run_closed_loop`]; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bip_series_get(
    series: *const BipSeries,
    index: usize,
    out: *mut BipRecord,
) -> BipStatus {
    guard(|| {
        let series = as_ref(series, "series")?;
        let out = as_mut(out, "out")?;
        let record = series.0.get(index).ok_or_else(|| {
            Failure(
                BipStatus::OutOfRange,
                format!("index {index} out of range for {} records", series.0.len()),
            )
        })?;
        *out = record.into();
        Ok(())
    })
}

/// Writes the series as CSV to `path`.
///
/// # Safety
/// `series` must come from [`bip_run_closed_loop`]; `path` null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bip_series_write_csv(
    series: *const BipSeries,
    path: *const c_char,
) -> BipStatus {
    guard(|| {
        let series = as_ref(series, "series")?;
        let path = as_str(path, "path")?;
        let file = File::create(path).map_err(Error::from)?;
        boost_ipi::write_csv(&series.0, BufWriter::new(file))?;
        Ok(())
    })
}

/// # Safety
/// `series` must be null or come from [`bip_run_closed_loop`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bip_series_free(series: *mut BipSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}
