use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use boost_ipi_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe { bip_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn controller_round_trip() {
    let mut cfg = std::mem::MaybeUninit::<BipIpiConfig>::uninit();
    assert_eq!(
        unsafe { bip_ipi_config_default(cfg.as_mut_ptr()) },
        BipStatus::Ok
    );
    let cfg = unsafe { cfg.assume_init() };
    assert_eq!(cfg.alpha, 30.0);

    let mut c = ptr::null_mut();
    assert_eq!(
        unsafe { bip_controller_new(&cfg, 12.0, 12.0, 0.5, &mut c) },
        BipStatus::Ok
    );
    let mut duty = 0.0;
    assert_eq!(
        unsafe { bip_controller_step(c, 12.0, 12.0, &mut duty) },
        BipStatus::Ok
    );
    assert_eq!(duty, 0.5);
    // upper clamp with positive error freezes the integral
    assert_eq!(
        unsafe { bip_controller_step(c, 12.0, 120.0, &mut duty) },
        BipStatus::Ok
    );
    assert_eq!(duty, 0.95);
    let mut integral = f64::NAN;
    assert_eq!(
        unsafe { bip_controller_integral(c, &mut integral) },
        BipStatus::Ok
    );
    assert_eq!(integral, 0.0);
    unsafe { bip_controller_free(c) };
}

#[test]
fn invalid_config_reports_message() {
    let mut cfg = std::mem::MaybeUninit::<BipIpiConfig>::uninit();
    unsafe { bip_ipi_config_default(cfg.as_mut_ptr()) };
    let mut cfg = unsafe { cfg.assume_init() };
    cfg.alpha = 0.0;
    let mut c = ptr::null_mut();
    let status = unsafe { bip_controller_new(&cfg, 12.0, 12.0, 0.5, &mut c) };
    assert_eq!(status, BipStatus::InvalidArgument);
    assert!(c.is_null());
    assert!(last_error().contains("alpha"), "{}", last_error());
}

#[test]
fn null_pointers_are_rejected() {
    let mut duty = 0.0;
    let status = unsafe { bip_controller_step(ptr::null_mut(), 1.0, 1.0, &mut duty) };
    assert_eq!(status, BipStatus::NullPointer);
    assert_eq!(unsafe { bip_series_len(ptr::null()) }, 0);
    unsafe {
        bip_controller_free(ptr::null_mut());
        bip_scenario_free(ptr::null_mut());
        bip_series_free(ptr::null_mut());
    }
}

#[test]
fn last_error_truncates() {
    let mut cfg = std::mem::MaybeUninit::<BipIpiConfig>::uninit();
    unsafe { bip_ipi_config_default(cfg.as_mut_ptr()) };
    let mut cfg = unsafe { cfg.assume_init() };
    cfg.u_min = 0.9;
    cfg.u_max = 0.1;
    let mut c = ptr::null_mut();
    unsafe { bip_controller_new(&cfg, 12.0, 12.0, 0.5, &mut c) };
    let full = unsafe { bip_last_error(ptr::null_mut(), 0) };
    assert!(full > 4);
    let mut buf = [1 as c_char; 4];
    assert_eq!(unsafe { bip_last_error(buf.as_mut_ptr(), 4) }, full);
    assert_eq!(buf[3], 0);
}

#[test]
fn averaged_dynamics_ccm() {
    let mut p = std::mem::MaybeUninit::<BipBoostParams>::uninit();
    unsafe { bip_boost_params_default(p.as_mut_ptr()) };
    let mut p = unsafe { p.assume_init() };
    p.resistance = 50.0;
    let mut d = std::mem::MaybeUninit::<BipDerivative>::uninit();
    let status = unsafe { bip_averaged_dynamics(&p, 0.96, 24.0, 0.5, d.as_mut_ptr()) };
    assert_eq!(status, BipStatus::Ok);
    let d = unsafe { d.assume_init() };
    assert_eq!(d.mode, BipMode::Ccm);
    assert!(d.di_l.abs() < 1e-9 && d.dv_c.abs() < 1e-6, "{d:?}");

    let mut d2 = d;
    let bad = unsafe { bip_averaged_dynamics(&p, 1.0, 24.0, 1.5, &mut d2) };
    assert_eq!(bad, BipStatus::InvalidArgument);
}

#[test]
fn preset_run_and_csv() {
    let name = CString::new("fig3").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { bip_scenario_preset(name.as_ptr(), &mut s) },
        BipStatus::Ok
    );
    let mut series = ptr::null_mut();
    assert_eq!(
        unsafe { bip_run_closed_loop(s, &mut series) },
        BipStatus::Ok
    );
    let n = unsafe { bip_series_len(series) };
    assert_eq!(n, 1201);

    let mut rec = std::mem::MaybeUninit::<BipRecord>::uninit();
    assert_eq!(
        unsafe { bip_series_get(series, n - 1, rec.as_mut_ptr()) },
        BipStatus::Ok
    );
    let rec = unsafe { rec.assume_init() };
    assert_eq!(rec.r, 50.0);
    let mut spare = rec;
    let status = unsafe { bip_series_get(series, n, &mut spare) };
    assert_eq!(status, BipStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig3.csv");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { bip_series_write_csv(series, cpath.as_ptr()) },
        BipStatus::Ok
    );
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1202);

    let missing = CString::new(dir.path().join("no/such/dir.csv").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { bip_series_write_csv(series, missing.as_ptr()) },
        BipStatus::Io
    );

    unsafe {
        bip_series_free(series);
        bip_scenario_free(s);
    }
}

#[test]
fn parse_errors_and_unknown_presets() {
    let text = CString::new("[controller]\nalpha = nope\n").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { bip_scenario_parse(text.as_ptr(), &mut s) },
        BipStatus::Parse
    );
    assert!(last_error().contains("line 2"), "{}", last_error());

    let name = CString::new("fig9").unwrap();
    assert_eq!(
        unsafe { bip_scenario_preset(name.as_ptr(), &mut s) },
        BipStatus::Parse
    );

    let ok = CString::new("").unwrap();
    assert_eq!(
        unsafe { bip_scenario_parse(ok.as_ptr(), &mut s) },
        BipStatus::Ok
    );
    unsafe { bip_scenario_free(s) };
}

#[test]
fn status_strings() {
    let s = unsafe { CStr::from_ptr(bip_status_str(BipStatus::Parse)) };
    assert_eq!(s.to_str().unwrap(), "parse error");
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/boost_ipi.h");
    assert!(header.exists());
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler available, skipping");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
