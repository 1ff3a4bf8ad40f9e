//! C ABI for the `loadcert` library.
//!
//! Cases are opaque handles created by [`lc_case_from_toml`] and released
//! with [`lc_case_free`]. Every fallible call returns an [`LcStatus`]; on
//! failure [`lc_last_error_message`] describes the error. Injections and
//! voltages are per-unit, ordered like the load buses of the network file.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use loadcert::{
    CaseError, InjectionVector, LoadFlowCase, OperatingPoint, PNorm, Provenance, SolveError,
    SolveOptions,
};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Numeric = 4,
    DimensionMismatch = 5,
    NotConverged = 6,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcComplex {
    pub re: f64,
    pub im: f64,
}

impl From<LcComplex> for Complex64 {
    fn from(z: LcComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl From<Complex64> for LcComplex {
    fn from(z: Complex64) -> Self {
        LcComplex { re: z.re, im: z.im }
    }
}

/// Certificate summary. Radii and known-point fields are NaN when the
/// corresponding condition was not evaluated or did not pass.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcCertificate {
    pub has_theorem: bool,
    pub theorem_ok: bool,
    pub xi_s_hat: f64,
    pub xi_delta_s: f64,
    pub u_min: f64,
    pub delta: f64,
    pub theorem_rho: f64,
    pub corollary_ok: bool,
    pub xi_s: f64,
    pub corollary_rho: f64,
    pub bolognani_ok: bool,
    pub improved_ok: bool,
}

/// Opaque case handle.
pub struct LcCase {
    case: LoadFlowCase,
    operating_point: Option<OperatingPoint>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: LcStatus, msg: impl Into<String>) -> LcStatus {
    set_error(msg);
    status
}

fn case_status(e: &CaseError) -> LcStatus {
    match e {
        CaseError::Network(_) => LcStatus::Parse,
        CaseError::Certificate(loadcert::CertificateError::DimensionMismatch { .. })
        | CaseError::Solve(SolveError::DimensionMismatch { .. }) => LcStatus::DimensionMismatch,
        _ => LcStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> LcStatus) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(LcStatus::Panic, "internal panic"),
    }
}

/// Reads `len` values; `data` may be null only when `len` is zero.
unsafe fn read_vec(data: *const LcComplex, len: usize) -> Option<Vec<Complex64>> {
    if len == 0 {
        return Some(Vec::new());
    }
    if data.is_null() {
        return None;
    }
    Some(
        std::slice::from_raw_parts(data, len)
            .iter()
            .map(|&z| z.into())
            .collect(),
    )
}

macro_rules! try_ptr {
    ($p:expr) => {
        match $p {
            Some(v) => v,
            None => {
                return fail(
                    LcStatus::NullPointer,
                    concat!("null pointer: ", stringify!($p)),
                )
            }
        }
    };
}

fn check_len(case: &LoadFlowCase, len: usize) -> Result<(), LcStatus> {
    if len != case.load_count() {
        return Err(fail(
            LcStatus::DimensionMismatch,
            format!("expected {} values, got {len}", case.load_count()),
        ));
    }
    Ok(())
}

/// Parses a network document and prepares a case. On success `*out` owns
/// a handle to release with [`lc_case_free`].
///
/// # Safety
/// `network_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_case_from_toml(
    network_toml: *const c_char,
    out: *mut *mut LcCase,
) -> LcStatus {
    guard(|| {
        if network_toml.is_null() || out.is_null() {
            return fail(LcStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let text = match CStr::from_ptr(network_toml).to_str() {
            Ok(t) => t,
            Err(e) => return fail(LcStatus::InvalidUtf8, e.to_string()),
        };
        match LoadFlowCase::from_toml(text) {
            Ok(case) => {
                *out = Box::into_raw(Box::new(LcCase {
                    case,
                    operating_point: None,
                }));
                LcStatus::Ok
            }
            Err(e) => fail(case_status(&e), e.to_string()),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `case` must come from [`lc_case_from_toml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lc_case_free(case: *mut LcCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Number of load buses, or 0 for a null handle.
///
/// # Safety
/// `case` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_case_load_count(case: *const LcCase) -> usize {
    case.as_ref().map_or(0, |c| c.case.load_count())
}

/// Copies the zero-load voltage profile into `out[0..len]`.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn lc_case_zero_load(
    case: *const LcCase,
    out: *mut LcComplex,
    len: usize,
) -> LcStatus {
    guard(|| {
        let c = try_ptr!(case.as_ref());
        if let Err(s) = check_len(&c.case, len) {
            return s;
        }
        if out.is_null() {
            return fail(LcStatus::NullPointer, "null output");
        }
        let out = std::slice::from_raw_parts_mut(out, len);
        for (o, w) in out.iter_mut().zip(c.case.zero_load().as_slice()) {
            *o = (*w).into();
        }
        LcStatus::Ok
    })
}

/// Stores a known solution pair used by [`lc_case_certify`]. Passing
/// `len == 0` clears it.
///
/// # Safety
/// `v` and `s` must hold `len` values each.
#[no_mangle]
pub unsafe extern "C" fn lc_case_set_operating_point(
    case: *mut LcCase,
    v: *const LcComplex,
    s: *const LcComplex,
    len: usize,
) -> LcStatus {
    guard(|| {
        let c = try_ptr!(case.as_mut());
        if len == 0 {
            c.operating_point = None;
            return LcStatus::Ok;
        }
        if let Err(st) = check_len(&c.case, len) {
            return st;
        }
        let v = try_ptr!(read_vec(v, len));
        let s = try_ptr!(read_vec(s, len));
        c.operating_point = Some(OperatingPoint {
            s: InjectionVector(s),
            v,
            provenance: Provenance::Measured,
        });
        LcStatus::Ok
    })
}

/// Loading measure of `s`.
///
/// # Safety
/// `s` must hold `len` values and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_case_xi(
    case: *const LcCase,
    s: *const LcComplex,
    len: usize,
    out: *mut f64,
) -> LcStatus {
    guard(|| {
        let c = try_ptr!(case.as_ref());
        let out = try_ptr!(out.as_mut());
        if let Err(st) = check_len(&c.case, len) {
            return st;
        }
        let s = try_ptr!(read_vec(s, len));
        match c.case.kernel() {
            Ok(k) => {
                *out = k.xi(&s);
                LcStatus::Ok
            }
            Err(e) => fail(case_status(&e), e.to_string()),
        }
    })
}

/// Evaluates every condition set for target `s`, including the known-point
/// conditions when an operating point is set.
///
/// # Safety
/// `s` must hold `len` values and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_case_certify(
    case: *const LcCase,
    s: *const LcComplex,
    len: usize,
    out: *mut LcCertificate,
) -> LcStatus {
    guard(|| {
        let c = try_ptr!(case.as_ref());
        let out = try_ptr!(out.as_mut());
        if let Err(st) = check_len(&c.case, len) {
            return st;
        }
        let s = try_ptr!(read_vec(s, len));
        let rep = match c.case.certify(&s, c.operating_point.as_ref(), &PNorm::ALL) {
            Ok(r) => r,
            Err(e) => return fail(case_status(&e), e.to_string()),
        };
        let nan = f64::NAN;
        let t = rep.theorem;
        *out = LcCertificate {
            has_theorem: t.is_some(),
            theorem_ok: t.is_some_and(|t| t.ok),
            xi_s_hat: t.map_or(nan, |t| t.xi_s_hat),
            xi_delta_s: t.map_or(nan, |t| t.xi_delta_s),
            u_min: t.map_or(nan, |t| t.u_min),
            delta: t.map_or(nan, |t| t.delta),
            theorem_rho: t.and_then(|t| t.rho).unwrap_or(nan),
            corollary_ok: rep.corollary.ok,
            xi_s: rep.corollary.xi_s,
            corollary_rho: rep.corollary.rho.unwrap_or(nan),
            bolognani_ok: rep.prior.bolognani_ok,
            improved_ok: rep.prior.improved_ok,
        };
        LcStatus::Ok
    })
}

/// Fixed-point solve from the zero-load profile. Writes the last iterate to
/// `v_out` even when the iteration does not converge.
///
/// # Safety
/// `s` and `v_out` must hold `len` values; `iterations` may be null.
#[no_mangle]
pub unsafe extern "C" fn lc_case_solve(
    case: *const LcCase,
    s: *const LcComplex,
    len: usize,
    tol: f64,
    max_iter: usize,
    v_out: *mut LcComplex,
    iterations: *mut usize,
) -> LcStatus {
    guard(|| {
        let c = try_ptr!(case.as_ref());
        if let Err(st) = check_len(&c.case, len) {
            return st;
        }
        let s = try_ptr!(read_vec(s, len));
        if v_out.is_null() {
            return fail(LcStatus::NullPointer, "null output");
        }
        let opts = SolveOptions { tol, max_iter };
        let (result, status) = match c.case.solve(&s, &opts, None) {
            Ok(r) => (r, LcStatus::Ok),
            Err(SolveError::NonConvergence(r)) => {
                let msg = format!("no convergence after {} iterations", r.iterations);
                (*r, fail(LcStatus::NotConverged, msg))
            }
            Err(e) => return fail(LcStatus::Numeric, e.to_string()),
        };
        let out = std::slice::from_raw_parts_mut(v_out, len);
        for (o, v) in out.iter_mut().zip(&result.v) {
            *o = (*v).into();
        }
        if let Some(it) = iterations.as_mut() {
            *it = result.iterations;
        }
        status
    })
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
