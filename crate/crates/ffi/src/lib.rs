//! C ABI over `orlicz_distort`.
//!
//! Objects are opaque handles created by `*_from_json` / `od_bundle_build`
//! and released with the matching `*_free`. Every fallible call returns an
//! [`OdStatus`] and writes its result through an out pointer; on failure
//! `od_last_error_message` describes the error for the calling thread.

use orlicz_distort::convex_calculus::{inverse, YoungFunction};
use orlicz_distort::distortion::{build_distortion, kaufman_constant, DistortionBundle};
use orlicz_distort::gauge::GaugeFunction;
use orlicz_distort::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    MalformedSpec = 3,
    InvalidParameter = 4,
    Domain = 5,
    Range = 6,
    ConditionFailed = 7,
    Inconclusive = 8,
    Numerical = 9,
    Input = 10,
    Io = 11,
    Panic = 12,
}

pub struct OdYoung(YoungFunction);

pub struct OdGauge(GaugeFunction);

pub struct OdBundle(DistortionBundle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OdStatus {
    match e {
        Error::InvalidParameter(_) => OdStatus::InvalidParameter,
        Error::Range { .. } => OdStatus::Range,
        Error::Domain(_) => OdStatus::Domain,
        Error::ConditionFailed(_) => OdStatus::ConditionFailed,
        Error::Inconclusive(_) => OdStatus::Inconclusive,
        Error::Numerical(_) => OdStatus::Numerical,
        Error::Spec { .. } => OdStatus::MalformedSpec,
        Error::Input(_) => OdStatus::Input,
        Error::Io(_) => OdStatus::Io,
    }
}

struct Fail(OdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> OdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OdStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside orlicz_distort".into());
            OdStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(OdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null("string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Fail(OdStatus::InvalidUtf8, e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out pointer"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn od_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn od_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn od_young_from_json(json: *const c_char, out: *mut *mut OdYoung) -> OdStatus {
    guard(|| {
        let s = read_str(json)?;
        let y = YoungFunction::from_json(s)?;
        write(out, Box::into_raw(Box::new(OdYoung(y))))
    })
}

/// `A(t)`.
///
/// # Safety
/// `y` must come from `od_young_from_json`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn od_young_eval(y: *const OdYoung, t: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        let y = deref(y, "young handle")?;
        write(out, y.0.eval(t))
    })
}

/// `A^{-1}(s)`.
///
/// # Safety
/// `y` must come from `od_young_from_json`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn od_young_inverse(y: *const OdYoung, s: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        let y = deref(y, "young handle")?;
        let v = inverse(&y.0, s)?;
        write(out, v)
    })
}

/// # Safety
/// `y` must come from `od_young_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn od_young_free(y: *mut OdYoung) {
    if !y.is_null() {
        drop(Box::from_raw(y));
    }
}

/// Parses `{"n": .., "family": .., ...}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn od_gauge_from_json(json: *const c_char, out: *mut *mut OdGauge) -> OdStatus {
    guard(|| {
        let s = read_str(json)?;
        let g = GaugeFunction::from_json(s)?;
        write(out, Box::into_raw(Box::new(OdGauge(g))))
    })
}

/// Normalized gauge value `φ°(r)`.
///
/// # Safety
/// `g` must come from `od_gauge_from_json`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn od_gauge_eval(g: *const OdGauge, r: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        let g = deref(g, "gauge handle")?;
        write(out, g.0.eval(r))
    })
}

/// # Safety
/// `g` must come from `od_gauge_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn od_gauge_free(g: *mut OdGauge) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Builds the distortion gauge of `a` and `phi` in dimension `n`.
///
/// # Safety
/// `a` and `phi` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn od_bundle_build(
    a: *const OdYoung,
    phi: *const OdGauge,
    n: usize,
    out: *mut *mut OdBundle,
) -> OdStatus {
    guard(|| {
        let a = deref(a, "young handle")?;
        let phi = deref(phi, "gauge handle")?;
        let b = build_distortion(&a.0, &phi.0, n)?;
        write(out, Box::into_raw(Box::new(OdBundle(b))))
    })
}

/// `ψ(r)`.
///
/// # Safety
/// `b` must come from `od_bundle_build`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn od_bundle_psi(b: *const OdBundle, r: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        let b = deref(b, "bundle handle")?;
        write(out, b.0.psi(r))
    })
}

/// Relative gap `ψ(st) / (φ(t) + t^n B(s)) - 1`; non-positive when the key
/// inequality holds.
///
/// # Safety
/// `b` must come from `od_bundle_build`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn od_bundle_key_gap(b: *const OdBundle, s: f64, t: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        let b = deref(b, "bundle handle")?;
        if !(s > 0.0 && t > 0.0) {
            return Err(Fail(OdStatus::InvalidParameter, format!("need s, t > 0, got ({s}, {t})")));
        }
        write(out, b.0.key_inequality_relative_gap(s, t))
    })
}

/// # Safety
/// `b` must come from `od_bundle_build` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn od_bundle_free(b: *mut OdBundle) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Constant of the quantitative Kaufman bound.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn od_kaufman_constant(n: usize, p: f64, alpha: f64, c_n: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        let v = kaufman_constant(n, p, alpha, c_n)?;
        write(out, v)
    })
}
