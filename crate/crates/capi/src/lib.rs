//! C ABI over the laboratory's field I/O and residual diagnostics.
//!
//! Conventions: every fallible call returns a `BeltramiCode`; on failure a
//! thread-local message is set, readable through `beltrami_last_error`
//! (the pointer stays valid until the next API call on the same thread).
//! Objects are opaque handles created and destroyed by this library;
//! passing a handle to the wrong `_free` or using it after free is
//! undefined behavior, as in any C library.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use beltrami_lab::chart::ScalarChartField;
use beltrami_lab::error::Error;
use beltrami_lab::io;
use beltrami_lab::ops::{beltrami_residual, Factor, Wrap};
use beltrami_lab::report::DiagnosticReport;
use beltrami_lab::scenario::{build_family, Family};
use beltrami_lab::vector::SymmetricVectorField;

/// Status of a call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BeltramiCode {
    Ok = 0,
    /// Bad argument or malformed input data.
    InvalidArgument = 1,
    /// Filesystem failure.
    Io = 2,
    /// Numerical failure (stagnation, degenerate geometry, non-finite data).
    Numeric = 3,
    /// A string argument was not valid UTF-8.
    Utf8 = 4,
    /// A required pointer was null.
    NullPointer = 5,
}

/// Opaque handle to a vector field.
#[repr(C)]
pub struct BeltramiField {
    _private: [u8; 0],
}

/// Opaque handle to a scalar chart field.
#[repr(C)]
pub struct BeltramiScalar {
    _private: [u8; 0],
}

/// Opaque handle to a diagnostic report.
#[repr(C)]
pub struct BeltramiReport {
    _private: [u8; 0],
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl ToString) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
}

fn code_of(e: &Error) -> BeltramiCode {
    match e {
        Error::Io(_) => BeltramiCode::Io,
        _ if e.exit_code() == 1 => BeltramiCode::InvalidArgument,
        _ => BeltramiCode::Numeric,
    }
}

fn fail(e: Error) -> BeltramiCode {
    let code = code_of(&e);
    set_error(e);
    code
}

/// Run a closure, translating panics into `Numeric` instead of unwinding
/// across the ABI.
fn guarded(f: impl FnOnce() -> BeltramiCode) -> BeltramiCode {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            BeltramiCode::Numeric
        }
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a str, BeltramiCode> {
    if ptr.is_null() {
        set_error("null path");
        return Err(BeltramiCode::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("path is not valid UTF-8");
        BeltramiCode::Utf8
    })
}

fn field_into_raw(f: SymmetricVectorField) -> *mut BeltramiField {
    Box::into_raw(Box::new(f)) as *mut BeltramiField
}

unsafe fn field_ref<'a>(ptr: *const BeltramiField) -> Option<&'a SymmetricVectorField> {
    (ptr as *const SymmetricVectorField).as_ref()
}

fn scalar_into_raw(f: ScalarChartField) -> *mut BeltramiScalar {
    Box::into_raw(Box::new(f)) as *mut BeltramiScalar
}

unsafe fn scalar_ref<'a>(ptr: *const BeltramiScalar) -> Option<&'a ScalarChartField> {
    (ptr as *const ScalarChartField).as_ref()
}

fn report_into_raw(r: DiagnosticReport) -> *mut BeltramiReport {
    Box::into_raw(Box::new(r)) as *mut BeltramiReport
}

unsafe fn report_ref<'a>(ptr: *const BeltramiReport) -> Option<&'a DiagnosticReport> {
    (ptr as *const DiagnosticReport).as_ref()
}

macro_rules! out_param {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(slot) => slot,
            None => {
                set_error("null output pointer");
                return BeltramiCode::NullPointer;
            }
        }
    };
}

/// Library version, as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn beltrami_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread; empty string when
/// the last call succeeded. Valid until the next API call on this thread.
#[no_mangle]
pub extern "C" fn beltrami_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Read a vector field CSV artifact.
#[no_mangle]
pub unsafe extern "C" fn beltrami_field_read_csv(
    path: *const c_char,
    out: *mut *mut BeltramiField,
) -> BeltramiCode {
    guarded(|| {
        let slot = out_param!(out);
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        match io::read_field(path) {
            Ok(field) => {
                *slot = field_into_raw(field);
                BeltramiCode::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write a vector field back to a CSV artifact.
#[no_mangle]
pub unsafe extern "C" fn beltrami_field_write_csv(
    field: *const BeltramiField,
    path: *const c_char,
) -> BeltramiCode {
    guarded(|| {
        let Some(field) = field_ref(field) else {
            set_error("null field");
            return BeltramiCode::NullPointer;
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        match io::write_field(path, field) {
            Ok(()) => BeltramiCode::Ok,
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn beltrami_field_free(field: *mut BeltramiField) {
    if !field.is_null() {
        drop(Box::from_raw(field as *mut SymmetricVectorField));
    }
}

/// Read a scalar chart CSV artifact.
#[no_mangle]
pub unsafe extern "C" fn beltrami_scalar_read_csv(
    path: *const c_char,
    out: *mut *mut BeltramiScalar,
) -> BeltramiCode {
    guarded(|| {
        let slot = out_param!(out);
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        match io::read_scalar_chart(path) {
            Ok(scalar) => {
                *slot = scalar_into_raw(scalar);
                BeltramiCode::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn beltrami_scalar_free(scalar: *mut BeltramiScalar) {
    if !scalar.is_null() {
        drop(Box::from_raw(scalar as *mut ScalarChartField));
    }
}

/// Classical three-mode field with unit factor on a seamless periodic
/// cube with `n` cells per axis over `[lo, hi)`.
#[no_mangle]
pub unsafe extern "C" fn beltrami_abc_field(
    a: f64,
    b: f64,
    c: f64,
    lo: f64,
    hi: f64,
    n: usize,
    out: *mut *mut BeltramiField,
) -> BeltramiCode {
    guarded(|| {
        let slot = out_param!(out);
        let family = Family::Abc { a, b, c, lo, hi, n };
        match build_family(&family, "abc") {
            Ok((field, _, _)) => {
                *slot = field_into_raw(field);
                BeltramiCode::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Defect of the curl relation for `field` against a factor: the scalar
/// chart `factor` when non-null, otherwise the constant `constant`.
/// `periodic` selects wrap-around difference stencils.
#[no_mangle]
pub unsafe extern "C" fn beltrami_residual_report(
    field: *const BeltramiField,
    factor: *const BeltramiScalar,
    constant: f64,
    periodic: bool,
    out: *mut *mut BeltramiReport,
) -> BeltramiCode {
    guarded(|| {
        let slot = out_param!(out);
        let Some(field) = field_ref(field) else {
            set_error("null field");
            return BeltramiCode::NullPointer;
        };
        let f = match scalar_ref(factor) {
            Some(scalar) => Factor::Chart(scalar.clone()),
            None => Factor::Constant(constant),
        };
        let wrap = if periodic { Wrap::Periodic } else { Wrap::Clamped };
        match beltrami_residual(field, &f, wrap) {
            Ok((_, report)) => {
                *slot = report_into_raw(report);
                BeltramiCode::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of entries in a report.
#[no_mangle]
pub unsafe extern "C" fn beltrami_report_len(report: *const BeltramiReport) -> usize {
    report_ref(report).map_or(0, |r| r.entries.len())
}

/// Copy the name of entry `index` into `buf` (NUL-terminated, truncating
/// never: fails instead when `cap` is too small).
#[no_mangle]
pub unsafe extern "C" fn beltrami_report_entry_name(
    report: *const BeltramiReport,
    index: usize,
    buf: *mut c_char,
    cap: usize,
) -> BeltramiCode {
    guarded(|| {
        let Some(report) = report_ref(report) else {
            set_error("null report");
            return BeltramiCode::NullPointer;
        };
        if buf.is_null() {
            set_error("null buffer");
            return BeltramiCode::NullPointer;
        }
        let Some(entry) = report.entries.get(index) else {
            set_error(format!(
                "entry index {index} out of range ({} entries)",
                report.entries.len()
            ));
            return BeltramiCode::InvalidArgument;
        };
        let bytes = entry.name.as_bytes();
        if bytes.len() + 1 > cap {
            set_error(format!(
                "buffer of {cap} bytes too small for name of {} bytes plus NUL",
                bytes.len()
            ));
            return BeltramiCode::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
        *buf.add(bytes.len()) = 0;
        BeltramiCode::Ok
    })
}

unsafe fn entry_norm(
    report: *const BeltramiReport,
    name: *const c_char,
    out: *mut f64,
    pick: impl Fn(&beltrami_lab::report::ReportEntry) -> f64,
) -> BeltramiCode {
    let slot = out_param!(out);
    let Some(report) = report_ref(report) else {
        set_error("null report");
        return BeltramiCode::NullPointer;
    };
    let name = match path_arg(name) {
        Ok(n) => n,
        Err(code) => return code,
    };
    match report.get(name) {
        Some(entry) => {
            *slot = pick(entry);
            BeltramiCode::Ok
        }
        None => {
            set_error(format!("no entry named '{name}'"));
            BeltramiCode::InvalidArgument
        }
    }
}

/// Max norm of the named entry.
#[no_mangle]
pub unsafe extern "C" fn beltrami_report_norm_inf(
    report: *const BeltramiReport,
    name: *const c_char,
    out: *mut f64,
) -> BeltramiCode {
    guarded(|| entry_norm(report, name, out, |e| e.norm_inf))
}

/// Grid L2 norm of the named entry.
#[no_mangle]
pub unsafe extern "C" fn beltrami_report_norm_l2(
    report: *const BeltramiReport,
    name: *const c_char,
    out: *mut f64,
) -> BeltramiCode {
    guarded(|| entry_norm(report, name, out, |e| e.norm_l2))
}

/// Serialize a report to pretty JSON at `path`.
#[no_mangle]
pub unsafe extern "C" fn beltrami_report_write_json(
    report: *const BeltramiReport,
    path: *const c_char,
) -> BeltramiCode {
    guarded(|| {
        let Some(report) = report_ref(report) else {
            set_error("null report");
            return BeltramiCode::NullPointer;
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        let json = match report.to_json() {
            Ok(j) => j,
            Err(e) => return fail(e),
        };
        match std::fs::write(path, json) {
            Ok(()) => BeltramiCode::Ok,
            Err(e) => fail(Error::Io(e)),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn beltrami_report_free(report: *mut BeltramiReport) {
    if !report.is_null() {
        drop(Box::from_raw(report as *mut DiagnosticReport));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn last_error_string() -> String {
        CStr::from_ptr(beltrami_last_error())
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn version_is_a_nonempty_c_string() {
        let v = unsafe { CStr::from_ptr(beltrami_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn abc_round_trip_and_residual_through_the_abi() {
        unsafe {
            let mut field: *mut BeltramiField = std::ptr::null_mut();
            let code =
                beltrami_abc_field(1.0, 1.0, 1.0, 0.0, std::f64::consts::TAU, 16, &mut field);
            assert_eq!(code, BeltramiCode::Ok);
            assert!(!field.is_null());

            let dir = tempfile::tempdir().unwrap();
            let path = cstr(dir.path().join("abc.csv").to_str().unwrap());
            assert_eq!(
                beltrami_field_write_csv(field, path.as_ptr()),
                BeltramiCode::Ok
            );

            let mut reread: *mut BeltramiField = std::ptr::null_mut();
            assert_eq!(
                beltrami_field_read_csv(path.as_ptr(), &mut reread),
                BeltramiCode::Ok
            );

            let mut report: *mut BeltramiReport = std::ptr::null_mut();
            assert_eq!(
                beltrami_residual_report(reread, std::ptr::null(), 1.0, true, &mut report),
                BeltramiCode::Ok
            );
            let n = beltrami_report_len(report);
            assert!(n >= 1);

            let mut found_total = false;
            let mut buf = [0i8; 64];
            for i in 0..n {
                assert_eq!(
                    beltrami_report_entry_name(report, i, buf.as_mut_ptr() as *mut c_char, 64),
                    BeltramiCode::Ok
                );
                let name = CStr::from_ptr(buf.as_ptr() as *const c_char)
                    .to_str()
                    .unwrap()
                    .to_string();
                found_total |= name == "residual_total";
            }
            assert!(found_total);

            let total = cstr("residual_total");
            let mut ninf = f64::NAN;
            assert_eq!(
                beltrami_report_norm_inf(report, total.as_ptr(), &mut ninf),
                BeltramiCode::Ok
            );
            assert!(ninf.is_finite() && ninf < 0.1, "residual {ninf}");

            let json_path = cstr(dir.path().join("report.json").to_str().unwrap());
            assert_eq!(
                beltrami_report_write_json(report, json_path.as_ptr()),
                BeltramiCode::Ok
            );
            let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
            assert!(text.contains("residual_total"));

            beltrami_report_free(report);
            beltrami_field_free(reread);
            beltrami_field_free(field);
        }
    }

    #[test]
    fn error_paths_set_codes_and_messages() {
        unsafe {
            let mut field: *mut BeltramiField = std::ptr::null_mut();
            assert_eq!(
                beltrami_field_read_csv(std::ptr::null(), &mut field),
                BeltramiCode::NullPointer
            );
            assert!(!last_error_string().is_empty());

            let missing = cstr("/nonexistent/path/field.csv");
            assert_eq!(
                beltrami_field_read_csv(missing.as_ptr(), &mut field),
                BeltramiCode::Io
            );

            let bad_utf8 = CString::new(vec![0x66u8, 0xFF, 0x66]).unwrap();
            assert_eq!(
                beltrami_field_read_csv(bad_utf8.as_ptr(), &mut field),
                BeltramiCode::Utf8
            );

            // A degenerate grid request is an invalid argument.
            assert_eq!(
                beltrami_abc_field(1.0, 1.0, 1.0, 0.0, 6.0, 2, &mut field),
                BeltramiCode::InvalidArgument
            );
            assert!(last_error_string().contains("grid"));

            // Out-of-range entry lookups and tiny buffers are rejected.
            let mut ok_field: *mut BeltramiField = std::ptr::null_mut();
            beltrami_abc_field(1.0, 1.0, 1.0, 0.0, std::f64::consts::TAU, 8, &mut ok_field);
            let mut report: *mut BeltramiReport = std::ptr::null_mut();
            beltrami_residual_report(ok_field, std::ptr::null(), 1.0, true, &mut report);
            let mut buf = [0i8; 4];
            assert_eq!(
                beltrami_report_entry_name(report, 0, buf.as_mut_ptr() as *mut c_char, 4),
                BeltramiCode::InvalidArgument
            );
            assert_eq!(
                beltrami_report_entry_name(report, 99, buf.as_mut_ptr() as *mut c_char, 4),
                BeltramiCode::InvalidArgument
            );
            let mut v = 0.0;
            let nope = cstr("nope");
            assert_eq!(
                beltrami_report_norm_l2(report, nope.as_ptr(), &mut v),
                BeltramiCode::InvalidArgument
            );
            beltrami_report_free(report);
            beltrami_field_free(ok_field);
        }
    }
}
