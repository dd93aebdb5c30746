//! C ABI over `cplx1`.
//!
//! Every fallible call returns a [`Cplx1Status`] and writes results through out
//! pointers. Handles are opaque; free them with the matching `*_free`.
//! The message for the most recent failure on the calling thread is available
//! from [`cplx1_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cplx1::increment::{run_increment, Constants, IncrementReport};
use cplx1::linsys::text::parse_matrix;
use cplx1::linsys::{matrix_complexity, Complexity, IntMatrix};
use cplx1::patterns::{count_distinct_solutions, count_solutions};
use cplx1::sieve::{c_chi2, GpyConfig, GpySieve, WTrickContext};
use cplx1::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cplx1Status {
    Ok = 0,
    Validation = 1,
    Budget = 2,
    Certification = 3,
    Parse = 4,
    Io = 5,
    NullPointer = 6,
    Panic = 7,
}

/// Integer matrix V (rows × t).
pub struct Cplx1Matrix(IntMatrix);

/// GPY weight evaluator for fixed (N, ω, b, η).
pub struct Cplx1Sieve(GpySieve);

/// Result of a density-increment run, with its JSON transcript.
pub struct Cplx1Report {
    report: IncrementReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> Cplx1Status {
    match e {
        Error::Validation(_) => Cplx1Status::Validation,
        Error::Budget(_) => Cplx1Status::Budget,
        Error::Certification(_) => Cplx1Status::Certification,
        Error::Parse { .. } => Cplx1Status::Parse,
        Error::Io(_) => Cplx1Status::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), Cplx1Status>>(f: F) -> Cplx1Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => Cplx1Status::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            Cplx1Status::Panic
        }
    }
}

fn fail(e: Error) -> Cplx1Status {
    set_error(&e.to_string());
    status_of(&e)
}

fn null() -> Cplx1Status {
    set_error("null pointer argument");
    Cplx1Status::NullPointer
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], Cplx1Status> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null())
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Cplx1Status> {
    p.as_mut().ok_or_else(null)
}

/// Message for the last failed call on this thread ("" if none). Valid until the next failing call.
#[no_mangle]
pub extern "C" fn cplx1_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn cplx1_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a matrix from `rows * cols` entries in row-major order.
///
/// # Safety
/// `data` must point to `rows * cols` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_matrix_new(
    rows: usize,
    cols: usize,
    data: *const i64,
    out_matrix: *mut *mut Cplx1Matrix,
) -> Cplx1Status {
    guard(|| {
        let o = out(out_matrix)?;
        if rows == 0 || cols == 0 {
            return Err(fail(Error::Validation("matrix must be non-empty".into())));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(Error::Validation("size overflow".into())))?;
        let d = slice(data, len)?;
        let rs: Vec<Vec<i64>> = d.chunks(cols).map(|r| r.to_vec()).collect();
        *o = Box::into_raw(Box::new(Cplx1Matrix(IntMatrix::from_i64(&rs))));
        Ok(())
    })
}

/// Parse the text format `r t` followed by r rows of t integers.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_matrix_parse(
    text: *const c_char,
    out_matrix: *mut *mut Cplx1Matrix,
) -> Cplx1Status {
    guard(|| {
        let o = out(out_matrix)?;
        if text.is_null() {
            return Err(null());
        }
        let s = CStr::from_ptr(text).to_str().map_err(|_| {
            fail(Error::Parse {
                line: 0,
                msg: "not UTF-8".into(),
            })
        })?;
        let m = parse_matrix(s).map_err(fail)?;
        *o = Box::into_raw(Box::new(Cplx1Matrix(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must come from `cplx1_matrix_new`/`cplx1_matrix_parse` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cplx1_matrix_free(m: *mut Cplx1Matrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Rank, number of columns t and translation invariance.
///
/// # Safety
/// `m` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_matrix_shape(
    m: *const Cplx1Matrix,
    out_rank: *mut usize,
    out_t: *mut usize,
    out_translation_invariant: *mut bool,
) -> Cplx1Status {
    guard(|| {
        let m = &m.as_ref().ok_or_else(null)?.0;
        *out(out_rank)? = m.rank();
        *out(out_t)? = m.cols();
        *out(out_translation_invariant)? = m.is_translation_invariant();
        Ok(())
    })
}

/// Cauchy–Schwarz complexity; −1 when infinite.
///
/// # Safety
/// `m` must be a live handle; `out_complexity` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_matrix_complexity(
    m: *const Cplx1Matrix,
    out_complexity: *mut i64,
) -> Cplx1Status {
    guard(|| {
        let m = &m.as_ref().ok_or_else(null)?.0;
        let o = out(out_complexity)?;
        *o = match matrix_complexity(m) {
            Complexity::Finite(s) => s as i64,
            Complexity::Infinite => -1,
        };
        Ok(())
    })
}

/// #{y ∈ A^t : V y = 0}, or pairwise-distinct solutions when `distinct`.
///
/// # Safety
/// `m` must be a live handle, `set` must point to `len` values, `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_count_solutions(
    m: *const Cplx1Matrix,
    set: *const i64,
    len: usize,
    distinct: bool,
    budget: u64,
    out_count: *mut u64,
) -> Cplx1Status {
    guard(|| {
        let m = &m.as_ref().ok_or_else(null)?.0;
        let a = slice(set, len)?;
        let o = out(out_count)?;
        let r = if distinct {
            count_distinct_solutions(m, a, budget)
        } else {
            count_solutions(m, a, budget)
        };
        let r = r.map_err(fail)?;
        *o = r
            .exact
            .ok_or_else(|| fail(Error::Budget("no exact count within budget".into())))?;
        Ok(())
    })
}

/// c_{χ,2} for the bundled cutoff.
#[no_mangle]
pub extern "C" fn cplx1_sieve_factor() -> f64 {
    c_chi2()
}

/// Prepare the weight ν for n ∈ [N] with modulus W = ∏_{p ≤ ω} p and R = N^η.
///
/// # Safety
/// `out_sieve` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_sieve_new(
    n: u64,
    omega: f64,
    b: i64,
    eta: f64,
    out_sieve: *mut *mut Cplx1Sieve,
) -> Cplx1Status {
    guard(|| {
        let o = out(out_sieve)?;
        let ctx = WTrickContext::new(n, omega, b).map_err(fail)?;
        let cfg = GpyConfig::new(&ctx, eta).map_err(fail)?;
        let limit = ctx.max_value().min(1 << 31);
        *o = Box::into_raw(Box::new(Cplx1Sieve(GpySieve::new(ctx, cfg, limit))));
        Ok(())
    })
}

/// # Safety
/// `s` must come from `cplx1_sieve_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cplx1_sieve_free(s: *mut Cplx1Sieve) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Raw weight Λ(n) and normalized ν(n) = Λ(n)/c_{χ,2}.
///
/// # Safety
/// `s` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_sieve_weight(
    s: *const Cplx1Sieve,
    n: i64,
    out_lambda: *mut f64,
    out_nu: *mut f64,
) -> Cplx1Status {
    guard(|| {
        let s = &s.as_ref().ok_or_else(null)?.0;
        let w = s.gpy_weight(n).map_err(fail)?;
        *out(out_lambda)? = w;
        *out(out_nu)? = w / s.c2;
        Ok(())
    })
}

/// Density increment on A ⊆ [−N, N] with the bundled constants.
///
/// # Safety
/// `m` must be a live handle, `set` must point to `len` values, `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_increment_run(
    m: *const Cplx1Matrix,
    set: *const i64,
    len: usize,
    n: i64,
    out_report: *mut *mut Cplx1Report,
) -> Cplx1Status {
    guard(|| {
        let m = &m.as_ref().ok_or_else(null)?.0;
        let a = slice(set, len)?;
        let o = out(out_report)?;
        let report = run_increment(m, a, n, &Constants::default().increment).map_err(fail)?;
        let text =
            serde_json::to_string(&report).map_err(|e| fail(Error::Validation(e.to_string())))?;
        let json =
            CString::new(text).map_err(|_| fail(Error::Validation("NUL in transcript".into())))?;
        *o = Box::into_raw(Box::new(Cplx1Report { report, json }));
        Ok(())
    })
}

/// Certified lower bound on #{y ∈ A^t : V y = 0} and the number of steps taken.
///
/// # Safety
/// `r` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cplx1_report_bound(
    r: *const Cplx1Report,
    out_bound: *mut u64,
    out_steps: *mut usize,
) -> Cplx1Status {
    guard(|| {
        let r = &r.as_ref().ok_or_else(null)?.report;
        *out(out_bound)? = r.outcome.certified_bound;
        *out(out_steps)? = r.steps.len();
        Ok(())
    })
}

/// JSON transcript; owned by the report.
///
/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cplx1_report_json(r: *const Cplx1Report) -> *const c_char {
    match r.as_ref() {
        Some(r) => r.json.as_ptr(),
        None => std::ptr::null(),
    }
}

/// # Safety
/// `r` must come from `cplx1_increment_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cplx1_report_free(r: *mut Cplx1Report) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn three_ap() -> *mut Cplx1Matrix {
        let mut m = ptr::null_mut();
        let data = [1i64, -2, 1];
        assert_eq!(
            unsafe { cplx1_matrix_new(1, 3, data.as_ptr(), &mut m) },
            Cplx1Status::Ok
        );
        m
    }

    #[test]
    fn matrix_roundtrip() {
        let m = three_ap();
        let (mut r, mut t, mut ti, mut c) = (0, 0, false, 0);
        unsafe {
            assert_eq!(
                cplx1_matrix_shape(m, &mut r, &mut t, &mut ti),
                Cplx1Status::Ok
            );
            assert_eq!(cplx1_matrix_complexity(m, &mut c), Cplx1Status::Ok);
            cplx1_matrix_free(m);
        }
        assert_eq!((r, t, ti, c), (1, 3, true, 1));
    }

    #[test]
    fn parse_error_sets_message() {
        let mut m = ptr::null_mut();
        let s = unsafe { cplx1_matrix_parse(c"1 3\n1 x 1\n".as_ptr(), &mut m) };
        assert_eq!(s, Cplx1Status::Parse);
        assert!(m.is_null());
        let msg = unsafe { CStr::from_ptr(cplx1_last_error()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn null_arguments() {
        let mut c = 0;
        assert_eq!(
            unsafe { cplx1_matrix_complexity(ptr::null(), &mut c) },
            Cplx1Status::NullPointer
        );
        let m = three_ap();
        assert_eq!(
            unsafe { cplx1_count_solutions(m, ptr::null(), 3, false, 1000, &mut 0) },
            Cplx1Status::NullPointer
        );
        unsafe { cplx1_matrix_free(m) };
        unsafe { cplx1_matrix_free(ptr::null_mut()) };
    }

    #[test]
    fn counts() {
        let m = three_ap();
        let a: Vec<i64> = (1..=9).collect();
        let (mut all, mut dist) = (0, 0);
        unsafe {
            assert_eq!(
                cplx1_count_solutions(m, a.as_ptr(), a.len(), false, 1 << 20, &mut all),
                Cplx1Status::Ok
            );
            assert_eq!(
                cplx1_count_solutions(m, a.as_ptr(), a.len(), true, 1 << 20, &mut dist),
                Cplx1Status::Ok
            );
            cplx1_matrix_free(m);
        }
        assert_eq!((all, dist), (41, 32));
    }

    #[test]
    fn sieve_handle() {
        let mut s = ptr::null_mut();
        let (mut l, mut nu) = (0.0, 0.0);
        unsafe {
            assert_eq!(cplx1_sieve_new(1000, 3.0, 1, 0.3, &mut s), Cplx1Status::Ok);
            assert_eq!(cplx1_sieve_weight(s, 1, &mut l, &mut nu), Cplx1Status::Ok);
            cplx1_sieve_free(s);
        }
        assert!(l >= 0.0 && (nu * cplx1_sieve_factor() - l).abs() < 1e-12);
        assert_eq!(
            unsafe { cplx1_sieve_new(1000, 3.0, 1, 0.9, &mut s) },
            Cplx1Status::Validation
        );
    }

    #[test]
    fn increment_report() {
        let m = three_ap();
        let a: Vec<i64> = (-40..=40).filter(|x| x % 2 == 0).collect();
        let mut r = ptr::null_mut();
        let (mut bound, mut steps) = (0, 0);
        unsafe {
            assert_eq!(
                cplx1_increment_run(m, a.as_ptr(), a.len(), 40, &mut r),
                Cplx1Status::Ok
            );
            assert_eq!(
                cplx1_report_bound(r, &mut bound, &mut steps),
                Cplx1Status::Ok
            );
            let js = CStr::from_ptr(cplx1_report_json(r)).to_str().unwrap();
            assert!(js.contains("\"outcome\""));
            cplx1_report_free(r);
            cplx1_matrix_free(m);
        }
        assert!(steps >= 1 && bound >= 1);
    }
}
