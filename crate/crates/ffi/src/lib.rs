//! C ABI over the `stresscontrol` toolkit.
//!
//! Every function returns an [`ScStatus`]; results go through out-pointers.
//! On failure, [`sc_last_error_message`] describes the most recent error on
//! the calling thread. Handles are opaque and must be released with the
//! matching `*_free` function. Matrices are dense, row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::DMatrix;
use stresscontrol::cli::{verify_artifacts, Scenario};
use stresscontrol::synthesis::{minimal_gamma, solve_h_infinity_riccati, LinearSystem, RiccatiSolution};
use stresscontrol::verify::closed_loop_hinf_norm;
use stresscontrol::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    GammaInfeasible = 3,
    NotStabilizable = 4,
    NotDetectable = 5,
    NonFiniteState = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&Error> for ScStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::GammaInfeasible { .. } | Error::NoFeasibleGammaFound(_) => ScStatus::GammaInfeasible,
            Error::NotStabilizable(_) => ScStatus::NotStabilizable,
            Error::NotDetectable(_) => ScStatus::NotDetectable,
            Error::NonFiniteState { .. } => ScStatus::NonFiniteState,
            Error::Numerical(_)
            | Error::ResonantModes(_)
            | Error::UnstableClosedLoop(_)
            | Error::SaddleUnstable(_) => ScStatus::Numerical,
            _ => ScStatus::InvalidArgument,
        }
    }
}

/// Opaque linear system.
pub struct ScSystem {
    sys: LinearSystem,
}

/// Opaque Riccati solution.
pub struct ScRiccati {
    rs: RiccatiSolution,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScRiccatiSummary {
    pub gamma_used: f64,
    pub residual_norm: f64,
    pub closed_loop_abscissa: f64,
    pub saddle_abscissa: f64,
    pub p_frobenius: f64,
    pub gain_frobenius: f64,
    pub state_dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: ScStatus, msg: impl Into<String>) -> ScStatus {
    set_error(msg.into());
    status
}

fn fail_err(e: &Error) -> ScStatus {
    fail(ScStatus::from(e), format!("{}: {e}", e.kind()))
}

/// Runs `f`, turning panics into [`ScStatus::Panic`].
fn guard(f: impl FnOnce() -> ScStatus) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == ScStatus::Ok {
                set_error(String::new());
            }
            status
        }
        Err(_) => fail(ScStatus::Panic, "internal panic"),
    }
}

unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize, name: &str) -> Result<DMatrix<f64>, ScStatus> {
    if rows * cols == 0 {
        return Ok(DMatrix::zeros(rows, cols));
    }
    if data.is_null() {
        return Err(fail(ScStatus::NullPointer, format!("{name} is null")));
    }
    let slice = std::slice::from_raw_parts(data, rows * cols);
    Ok(DMatrix::from_row_slice(rows, cols, slice))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, ScStatus> {
    if s.is_null() {
        return Err(fail(ScStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(ScStatus::InvalidArgument, "string argument is not UTF-8"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a Euclidean system `ds/dt = A s + B1 w + B2 u`, `y = C s`.
/// `a` is `n x n`, `b1` is `n x m1`, `b2` is `n x m2`, `c` is `p x n`.
///
/// # Safety
/// Each array must hold the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_system_from_matrices(
    n: usize,
    m1: usize,
    m2: usize,
    p: usize,
    a: *const f64,
    b1: *const f64,
    b2: *const f64,
    c: *const f64,
    gamma: f64,
    out: *mut *mut ScSystem,
) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScStatus::NullPointer, "out is null");
        }
        let mats = (|| {
            Ok::<_, ScStatus>((
                read_matrix(a, n, n, "a")?,
                read_matrix(b1, n, m1, "b1")?,
                read_matrix(b2, n, m2, "b2")?,
                read_matrix(c, p, n, "c")?,
            ))
        })();
        let (a, b1, b2, c) = match mats {
            Ok(m) => m,
            Err(s) => return s,
        };
        match LinearSystem::euclidean(a, b1, b2, c, gamma) {
            Ok(sys) => {
                *out = Box::into_raw(Box::new(ScSystem { sys }));
                ScStatus::Ok
            }
            Err(e) => fail_err(&e),
        }
    })
}

/// Builds the discretized system described by a scenario TOML document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_system_from_scenario_toml(toml: *const c_char, out: *mut *mut ScSystem) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScStatus::NullPointer, "out is null");
        }
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::from_toml_str(text) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(ScSystem { sys: sc.plant.sys }));
                ScStatus::Ok
            }
            Err(e) => fail_err(&e),
        }
    })
}

/// # Safety
/// `sys` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_system_free(sys: *mut ScSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_system_state_dim(sys: *const ScSystem, out: *mut usize) -> ScStatus {
    guard(|| match (sys.as_ref(), out.is_null()) {
        (Some(s), false) => {
            *out = s.sys.state_dim();
            ScStatus::Ok
        }
        _ => fail(ScStatus::NullPointer, "null argument"),
    })
}

/// Solves the H-infinity Riccati equation at the system's gamma.
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_riccati_solve(sys: *const ScSystem, out: *mut *mut ScRiccati) -> ScStatus {
    guard(|| {
        let Some(s) = sys.as_ref() else {
            return fail(ScStatus::NullPointer, "sys is null");
        };
        if out.is_null() {
            return fail(ScStatus::NullPointer, "out is null");
        }
        match solve_h_infinity_riccati(&s.sys) {
            Ok(rs) => {
                *out = Box::into_raw(Box::new(ScRiccati { rs }));
                ScStatus::Ok
            }
            Err(e) => fail_err(&e),
        }
    })
}

/// # Safety
/// `r` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_riccati_free(r: *mut ScRiccati) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_riccati_summary(r: *const ScRiccati, out: *mut ScRiccatiSummary) -> ScStatus {
    guard(|| match (r.as_ref(), out.is_null()) {
        (Some(r), false) => {
            let rep = r.rs.report();
            *out = ScRiccatiSummary {
                gamma_used: rep.gamma_used,
                residual_norm: rep.residual_norm,
                closed_loop_abscissa: rep.closed_loop_abscissa,
                saddle_abscissa: rep.saddle_abscissa,
                p_frobenius: rep.p_frobenius,
                gain_frobenius: rep.gain_frobenius,
                state_dim: r.rs.p.nrows(),
            };
            ScStatus::Ok
        }
        _ => fail(ScStatus::NullPointer, "null argument"),
    })
}

/// Copies `P` (row-major, `n * n` doubles) into `buf` of length `len`.
///
/// # Safety
/// `r` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_riccati_copy_p(r: *const ScRiccati, buf: *mut f64, len: usize) -> ScStatus {
    guard(|| {
        let Some(r) = r.as_ref() else {
            return fail(ScStatus::NullPointer, "r is null");
        };
        let p = &r.rs.p;
        let need = p.nrows() * p.ncols();
        if len < need {
            return fail(ScStatus::BufferTooSmall, format!("need {need} doubles, got {len}"));
        }
        if buf.is_null() {
            return fail(ScStatus::NullPointer, "buf is null");
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (i, row) in p.row_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                dst[i * p.ncols() + j] = *v;
            }
        }
        ScStatus::Ok
    })
}

/// Closed-loop H-infinity norm from `w` to `(C s, u)`.
///
/// # Safety
/// Both handles must be live and belong together; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_hinf_norm(sys: *const ScSystem, r: *const ScRiccati, out: *mut f64) -> ScStatus {
    guard(|| match (sys.as_ref(), r.as_ref(), out.is_null()) {
        (Some(s), Some(r), false) => match closed_loop_hinf_norm(&s.sys, &r.rs) {
            Ok(g) => {
                *out = g.value;
                ScStatus::Ok
            }
            Err(e) => fail_err(&e),
        },
        _ => fail(ScStatus::NullPointer, "null argument"),
    })
}

/// Smallest feasible gamma by bisection, starting from the bracket `[lo, hi]`.
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_minimal_gamma(sys: *const ScSystem, lo: f64, hi: f64, out: *mut f64) -> ScStatus {
    guard(|| match (sys.as_ref(), out.is_null()) {
        (Some(s), false) => match minimal_gamma(&s.sys, lo, hi) {
            Ok(g) => {
                *out = g;
                ScStatus::Ok
            }
            Err(e) => fail_err(&e),
        },
        _ => fail(ScStatus::NullPointer, "null argument"),
    })
}

/// Runs the checks enabled in a scenario and returns the report as JSON.
/// `*pass` is 1 when every check passed. Free `*json` with [`sc_string_free`].
///
/// # Safety
/// `toml` must be a NUL-terminated string; `json` and `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_verify_scenario_toml(toml: *const c_char, json: *mut *mut c_char, pass: *mut c_int) -> ScStatus {
    guard(|| {
        if json.is_null() || pass.is_null() {
            return fail(ScStatus::NullPointer, "null argument");
        }
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let scenario = match Scenario::from_toml_str(text) {
            Ok(s) => s,
            Err(e) => return fail_err(&e),
        };
        let (report, _) = verify_artifacts(&scenario, None);
        let body = serde_json::to_string(&report).expect("report serializes");
        *json = CString::new(body).expect("json has no NUL").into_raw();
        *pass = c_int::from(report.pass);
        ScStatus::Ok
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
