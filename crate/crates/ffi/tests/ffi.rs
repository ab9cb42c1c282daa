use std::ffi::{CStr, CString};
use std::ptr;

use sepsplit_ffi::*;

fn last_error() -> String {
    let p = sep_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn pendulum_round_trip() {
    unsafe {
        let name = CString::new("pendulum-em").unwrap();
        let mut sys = ptr::null_mut();
        assert_eq!(sep_system_from_example(name.as_ptr(), 2.6, &mut sys), SepStatus::Ok);
        let mut orbit = ptr::null_mut();
        assert_eq!(sep_orbit_compute(sys, 1, &mut orbit), SepStatus::Ok);

        let (mut x, mut v) = (0.0, 0.0);
        assert_eq!(sep_orbit_eval(orbit, 0.0, &mut x, &mut v), SepStatus::Ok);
        assert!((x - std::f64::consts::PI).abs() < 1e-8 && (v - 2.0).abs() < 1e-8);
        let mut lam = 0.0;
        assert_eq!(sep_orbit_lambda(orbit, &mut lam), SepStatus::Ok);
        assert!((lam - 1.0).abs() < 1e-10);

        let mut c = ptr::null_mut();
        assert_eq!(sep_coefficients_compute(sys, orbit, 1e-3, &mut c), SepStatus::Ok);
        let (mut a, mut b, mut amp) = (0.0, 0.0, 0.0);
        assert_eq!(sep_coefficients_ab(c, &mut a, &mut b), SepStatus::Ok);
        assert_eq!(sep_coefficients_amplitude(c, &mut amp), SepStatus::Ok);
        assert!((amp - 4.19420).abs() < 1e-4);
        assert!((a.hypot(b) - amp).abs() < 1e-12);
        let mut pred = 0.0;
        assert_eq!(sep_coefficients_predict(c, 0.0, &mut pred), SepStatus::Ok);
        assert!((pred - a * 1e-3f64.powf(3.1)).abs() < 1e-20);

        let mut m = 0.0;
        assert_eq!(sep_melnikov(sys, orbit, 1e-2, 0.003, &mut m), SepStatus::Ok);
        assert!(m.is_finite() && m != 0.0);

        sep_coefficients_free(c);
        sep_orbit_free(orbit);
        sep_system_free(sys);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut sys = ptr::null_mut();
        let f = CString::new("sin(x").unwrap();
        let q = CString::new("sin(xi)").unwrap();
        assert_eq!(sep_system_new(f.as_ptr(), q.as_ptr(), 2.6, 0.0, &mut sys), SepStatus::Parse);
        assert!(sys.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(sep_system_new(ptr::null(), q.as_ptr(), 2.6, 0.0, &mut sys), SepStatus::NullPointer);
        assert!(last_error().contains("`f`"));

        let name = CString::new("no-such-system").unwrap();
        assert_eq!(sep_system_from_example(name.as_ptr(), 2.6, &mut sys), SepStatus::InvalidArgument);

        // r below the admissible range
        let name = CString::new("pendulum-em").unwrap();
        assert_eq!(sep_system_from_example(name.as_ptr(), 2.4, &mut sys), SepStatus::Hypothesis);

        assert_eq!(sep_system_from_example(name.as_ptr(), 2.6, &mut sys), SepStatus::Ok);
        let mut orbit = ptr::null_mut();
        assert_eq!(sep_orbit_compute(sys, 0, &mut orbit), SepStatus::InvalidArgument);
        assert_eq!(sep_orbit_compute(sys, 1, ptr::null_mut()), SepStatus::NullPointer);
        assert_eq!(sep_orbit_compute(ptr::null(), 1, &mut orbit), SepStatus::NullPointer);
        sep_system_free(sys);

        // freeing null is a no-op
        sep_system_free(ptr::null_mut());
        sep_orbit_free(ptr::null_mut());
        sep_coefficients_free(ptr::null_mut());
    }
}

#[test]
fn quasi_periodic_has_no_single_pair() {
    unsafe {
        let name = CString::new("pendulum-qp").unwrap();
        let mut sys = ptr::null_mut();
        assert_eq!(sep_system_from_example(name.as_ptr(), 2.6, &mut sys), SepStatus::Ok);
        let mut orbit = ptr::null_mut();
        assert_eq!(sep_orbit_compute(sys, 1, &mut orbit), SepStatus::Ok);
        let mut c = ptr::null_mut();
        assert_eq!(sep_coefficients_compute(sys, orbit, 1e-3, &mut c), SepStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(sep_coefficients_ab(c, &mut a, &mut b), SepStatus::InvalidArgument);
        let mut amp = 0.0;
        assert_eq!(sep_coefficients_amplitude(c, &mut amp), SepStatus::Ok);
        assert!(amp > 0.0);
        sep_coefficients_free(c);
        sep_orbit_free(orbit);
        sep_system_free(sys);
    }
}

#[test]
fn version_is_cargo_version() {
    let v = unsafe { CStr::from_ptr(sep_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/sepsplit.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
