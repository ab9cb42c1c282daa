//! C ABI over the `sepsplit` core.
//!
//! Every call returns a [`SepStatus`]. On failure the message is available
//! from [`sep_last_error`] on the same thread until the next failing call.
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sepsplit::catalog;
use sepsplit::dynsys::{compute_separatrix, find_saddle, Branch, Forcing, OrbitOptions, SeparatrixOrbit, SystemSpec};
use sepsplit::oracle::{melnikov_direct, MelnikovOptions};
use sepsplit::stphase::{splitting_coefficients, Coefficients, SplittingCoefficients, StphaseOptions};
use sepsplit::Error;

/// Result of every exported call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A hypothesis of the asymptotic theory fails for this input.
    Hypothesis = 3,
    Numerical = 4,
    Parse = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Unperturbed field, perturbation profile and forcing.
pub struct SepSystem {
    spec: SystemSpec,
    saddle_guess: f64,
}

/// Saddle connection of a [`SepSystem`].
pub struct SepOrbit {
    orbit: SeparatrixOrbit,
}

/// Leading-order splitting coefficients at one ε.
pub struct SepCoefficients {
    coeffs: SplittingCoefficients,
    eps: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SepStatus {
    match e {
        Error::Parse { .. } => SepStatus::Parse,
        Error::Hypothesis(_) => SepStatus::Hypothesis,
        Error::Invalid(_) | Error::Config(_) => SepStatus::InvalidArgument,
        _ => SepStatus::Numerical,
    }
}

fn fail(status: SepStatus, msg: impl Into<String>) -> SepStatus {
    set_error(msg.into());
    status
}

/// Run `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), SepStatus>) -> SepStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SepStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SepStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lift<T>(r: sepsplit::Result<T>) -> Result<T, SepStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SepStatus> {
    if p.is_null() {
        return Err(fail(SepStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SepStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, SepStatus> {
    p.as_ref().ok_or_else(|| fail(SepStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), SepStatus> {
    if out.is_null() {
        return Err(fail(SepStatus::NullPointer, format!("`{name}` is null")));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failing call on this thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sep_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Periodic system `x'' = f(x) + 2 ε^r q(x/ε, x') cos(t/ε)`.
///
/// `f` is an expression in `x`; `q` in `xi` and `v`. `saddle_guess` seeds
/// the saddle search.
///
/// # Safety
/// `f` and `q` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_system_new(
    f: *const c_char,
    q: *const c_char,
    r: f64,
    saddle_guess: f64,
    out: *mut *mut SepSystem,
) -> SepStatus {
    guard(|| {
        let (f, q) = (str_arg(f, "f")?, str_arg(q, "q")?);
        let spec = lift(SystemSpec::new(f, q, r, Forcing::Periodic))?;
        put(out, Box::into_raw(Box::new(SepSystem { spec, saddle_guess })), "out")
    })
}

/// One of the catalog systems: `pendulum-em`, `pendulum-qp` or `cubic`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_system_from_example(name: *const c_char, r: f64, out: *mut *mut SepSystem) -> SepStatus {
    guard(|| {
        let e = lift(catalog::by_name(str_arg(name, "name")?, r))?;
        let sys = SepSystem { spec: e.system, saddle_guess: e.saddle_guess };
        put(out, Box::into_raw(Box::new(sys)), "out")
    })
}

/// # Safety
/// `sys` must come from a `sep_system_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn sep_system_free(sys: *mut SepSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Compute the saddle connection leaving along the unstable direction
/// with sign `branch` (`+1` or `-1`).
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_orbit_compute(sys: *const SepSystem, branch: i32, out: *mut *mut SepOrbit) -> SepStatus {
    guard(|| {
        let sys = ref_arg(sys, "sys")?;
        let branch = match branch {
            1 => Branch::Plus,
            -1 => Branch::Minus,
            b => return Err(fail(SepStatus::InvalidArgument, format!("branch must be +1 or -1, got {b}"))),
        };
        let eq = lift(find_saddle(&sys.spec, sys.saddle_guess))?;
        let orbit = lift(compute_separatrix(&sys.spec, &eq, branch, &OrbitOptions::default()))?;
        put(out, Box::into_raw(Box::new(SepOrbit { orbit })), "out")
    })
}

/// # Safety
/// `orbit` must come from [`sep_orbit_compute`], or be null.
#[no_mangle]
pub unsafe extern "C" fn sep_orbit_free(orbit: *mut SepOrbit) {
    if !orbit.is_null() {
        drop(Box::from_raw(orbit));
    }
}

/// Position and velocity on the connection at time `t`.
///
/// # Safety
/// `orbit` must be a live handle; `x` and `v` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_orbit_eval(orbit: *const SepOrbit, t: f64, x: *mut f64, v: *mut f64) -> SepStatus {
    guard(|| {
        let o = ref_arg(orbit, "orbit")?;
        if !t.is_finite() {
            return Err(fail(SepStatus::InvalidArgument, "t must be finite"));
        }
        let p = o.orbit.eval(t);
        put(x, p.x, "x")?;
        put(v, p.v, "v")
    })
}

/// Saddle eigenvalue λ of the connection.
///
/// # Safety
/// `orbit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_orbit_lambda(orbit: *const SepOrbit, out: *mut f64) -> SepStatus {
    guard(|| put(out, ref_arg(orbit, "orbit")?.orbit.lambda(), "out"))
}

/// Stationary-phase splitting coefficients at `eps`.
///
/// # Safety
/// `sys` and `orbit` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_coefficients_compute(
    sys: *const SepSystem,
    orbit: *const SepOrbit,
    eps: f64,
    out: *mut *mut SepCoefficients,
) -> SepStatus {
    guard(|| {
        let (sys, orbit) = (ref_arg(sys, "sys")?, ref_arg(orbit, "orbit")?);
        let coeffs = lift(splitting_coefficients(&sys.spec, &orbit.orbit, eps, &StphaseOptions::default()))?;
        put(out, Box::into_raw(Box::new(SepCoefficients { coeffs, eps })), "out")
    })
}

/// # Safety
/// `c` must come from [`sep_coefficients_compute`], or be null.
#[no_mangle]
pub unsafe extern "C" fn sep_coefficients_free(c: *mut SepCoefficients) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// `𝒜` and `ℬ` of a periodic problem.
///
/// # Safety
/// `c` must be a live handle; `a` and `b` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_coefficients_ab(c: *const SepCoefficients, a: *mut f64, b: *mut f64) -> SepStatus {
    guard(|| match &ref_arg(c, "coefficients")?.coeffs.coefficients {
        Coefficients::Periodic { a: ca, b: cb } => {
            put(a, *ca, "a")?;
            put(b, *cb, "b")
        }
        Coefficients::QuasiPeriodic { .. } => {
            Err(fail(SepStatus::InvalidArgument, "quasi-periodic coefficients have no single (A, B) pair"))
        }
    })
}

/// Amplitude of the leading term, in units of `ε^{r+1/2}`.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_coefficients_amplitude(c: *const SepCoefficients, out: *mut f64) -> SepStatus {
    guard(|| put(out, ref_arg(c, "coefficients")?.coeffs.amplitude(), "out"))
}

/// Leading-order displacement at phase `t0` for the ε the coefficients were computed at.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_coefficients_predict(c: *const SepCoefficients, t0: f64, out: *mut f64) -> SepStatus {
    guard(|| {
        let c = ref_arg(c, "coefficients")?;
        put(out, c.coeffs.predict(c.eps, t0), "out")
    })
}

/// Melnikov integral at `(eps, t0)` by direct quadrature.
///
/// # Safety
/// `sys` and `orbit` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sep_melnikov(
    sys: *const SepSystem,
    orbit: *const SepOrbit,
    eps: f64,
    t0: f64,
    out: *mut f64,
) -> SepStatus {
    guard(|| {
        let (sys, orbit) = (ref_arg(sys, "sys")?, ref_arg(orbit, "orbit")?);
        let m = lift(melnikov_direct(&sys.spec, &orbit.orbit, eps, t0, &MelnikovOptions::default()))?;
        put(out, m, "out")
    })
}
