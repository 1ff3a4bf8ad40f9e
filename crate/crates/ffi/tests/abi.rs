use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use loadcert_ffi::*;

const NETWORK: &str = r#"
[bases]
power_mva = 1.0
voltage_kv = 1.0

[[buses]]
id = "0"
kind = "slack"

[[buses]]
id = "1"
kind = "load"

[[branches]]
from = "0"
to = "1"
kind = "line"
g = 2.0
b = -6.0
"#;

fn c(re: f64, im: f64) -> LcComplex {
    LcComplex { re, im }
}

fn open(text: &str) -> *mut LcCase {
    let text = CString::new(text).unwrap();
    let mut case = ptr::null_mut();
    assert_eq!(
        unsafe { lc_case_from_toml(text.as_ptr(), &mut case) },
        LcStatus::Ok
    );
    assert!(!case.is_null());
    case
}

fn last_error() -> String {
    let p = lc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn certify_and_solve_single_bus() {
    let case = open(NETWORK);
    unsafe {
        assert_eq!(lc_case_load_count(case), 1);
        let s = [c(-0.8, -0.3)];
        let mut xi = 0.0;
        assert_eq!(lc_case_xi(case, s.as_ptr(), 1, &mut xi), LcStatus::Ok);
        // xi = |s| / |y| for one bus at unit zero-load voltage
        assert!((xi - (0.8f64.hypot(0.3) / 2.0f64.hypot(6.0))).abs() < 1e-15);

        let mut cert = std::mem::zeroed::<LcCertificate>();
        assert_eq!(
            lc_case_certify(case, s.as_ptr(), 1, &mut cert),
            LcStatus::Ok
        );
        assert!(cert.corollary_ok && !cert.has_theorem && cert.theorem_rho.is_nan());
        assert!(cert.corollary_rho > 0.0);

        let mut v = [c(0.0, 0.0)];
        let mut iterations = 0usize;
        let status = lc_case_solve(
            case,
            s.as_ptr(),
            1,
            1e-12,
            200,
            v.as_mut_ptr(),
            &mut iterations,
        );
        assert_eq!(status, LcStatus::Ok);
        assert!(iterations > 1);

        assert_eq!(
            lc_case_set_operating_point(case, v.as_ptr(), s.as_ptr(), 1),
            LcStatus::Ok
        );
        let target = [c(-0.85, -0.3)];
        assert_eq!(
            lc_case_certify(case, target.as_ptr(), 1, &mut cert),
            LcStatus::Ok
        );
        assert!(cert.has_theorem && cert.theorem_ok && cert.theorem_rho >= 0.0);

        assert_eq!(
            lc_case_set_operating_point(case, ptr::null(), ptr::null(), 0),
            LcStatus::Ok
        );
        assert_eq!(
            lc_case_certify(case, target.as_ptr(), 1, &mut cert),
            LcStatus::Ok
        );
        assert!(!cert.has_theorem);
        lc_case_free(case);
    }
}

#[test]
fn errors_are_reported_with_codes() {
    unsafe {
        let mut case = ptr::null_mut();
        assert_eq!(
            lc_case_from_toml(ptr::null(), &mut case),
            LcStatus::NullPointer
        );
        let bad = CString::new("[bases]\npower_mva = 1.0\n").unwrap();
        assert_eq!(lc_case_from_toml(bad.as_ptr(), &mut case), LcStatus::Parse);
        assert!(case.is_null());
        assert!(!last_error().is_empty());

        let case = open(NETWORK);
        let s = [c(0.0, 0.0); 2];
        let mut xi = 0.0;
        assert_eq!(
            lc_case_xi(case, s.as_ptr(), 2, &mut xi),
            LcStatus::DimensionMismatch
        );
        assert!(last_error().contains("expected 1"));
        assert_eq!(
            lc_case_xi(case, ptr::null(), 1, &mut xi),
            LcStatus::NullPointer
        );

        let mut v = [c(0.0, 0.0)];
        let heavy = [c(-5.0, 0.0)];
        let status = lc_case_solve(
            case,
            heavy.as_ptr(),
            1,
            1e-12,
            5,
            v.as_mut_ptr(),
            ptr::null_mut(),
        );
        assert!(
            matches!(status, LcStatus::NotConverged | LcStatus::Numeric),
            "{status:?}"
        );

        // a pair that does not solve the equations is rejected in debug builds
        let wrong_v = [c(0.5, 0.0)];
        let s1 = [c(-0.1, 0.0)];
        assert_eq!(
            lc_case_set_operating_point(case, wrong_v.as_ptr(), s1.as_ptr(), 1),
            LcStatus::Ok
        );
        let mut cert = std::mem::zeroed::<LcCertificate>();
        let status = lc_case_certify(case, s1.as_ptr(), 1, &mut cert);
        if cfg!(debug_assertions) {
            assert_eq!(status, LcStatus::Numeric);
        }
        lc_case_free(case);
        lc_case_free(ptr::null_mut());
        assert_eq!(lc_case_load_count(ptr::null()), 0);
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(lc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        r#"#include "loadcert.h"
int main(void) {
    LcCase *c = NULL;
    LcStatus st = lc_case_from_toml("", &c);
    LcCertificate cert;
    (void)cert;
    lc_case_free(c);
    return st == LC_STATUS_OK;
}
"#,
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-I")
        .arg(&header_dir)
        .arg(&src)
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
