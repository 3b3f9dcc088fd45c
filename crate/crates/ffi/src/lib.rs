//! C ABI over `tensor-als`.
//!
//! Problems and traces are opaque heap handles created and destroyed through
//! this interface. Every fallible call returns a [`TalsStatus`]; the message of
//! the most recent failure on the calling thread is available from
//! [`tals_last_error`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tensor_als::als::{run, RunTrace, StopRule, Termination};
use tensor_als::cli::{trace_csv, RunConfig};
use tensor_als::diagnostics::{rate_estimate, RateClass};
use tensor_als::gallery::{self, ProblemInstance};
use tensor_als::oracle::q_lambda_formula;
use tensor_als::AlsError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TalsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    NotSpd = 4,
    ZeroTarget = 5,
    ProjectedSingular = 6,
    SeriesTooShort = 7,
    Serialization = 8,
    OutOfRange = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TalsTermination {
    MaxSweeps = 0,
    FStalled = 1,
    GradSmall = 2,
    AngleSmall = 3,
    Degenerate = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TalsRateClass {
    Superlinear = 0,
    Linear = 1,
    Sublinear = 2,
    Inconclusive = 3,
}

/// One micro-step. `tan_angle` is NaN when the problem has no reference.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TalsRecord {
    /// Sweep index, from 1.
    pub sweep: usize,
    /// Block index, from 1.
    pub mu: usize,
    pub f: f64,
    pub decrement: f64,
    pub grad_norm: f64,
    pub w_rank: usize,
    pub resid_orth: f64,
    pub param_norm_max: f64,
    pub tan_angle: f64,
    pub degenerate: bool,
}

/// Opaque problem handle.
pub struct TalsProblem(ProblemInstance);

/// Opaque run-trace handle.
pub struct TalsTrace(RunTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &AlsError) -> TalsStatus {
    match e {
        AlsError::ShapeMismatch(_) | AlsError::InvalidShape(_) | AlsError::ParamMismatch(_) => {
            TalsStatus::ShapeMismatch
        }
        AlsError::NotSpd(_) | AlsError::NotPsdOnVector(_) => TalsStatus::NotSpd,
        AlsError::ZeroTarget | AlsError::ZeroAngle => TalsStatus::ZeroTarget,
        AlsError::ProjectedSingular => TalsStatus::ProjectedSingular,
        AlsError::SeriesTooShort { .. } => TalsStatus::SeriesTooShort,
        AlsError::Serialization(_) => TalsStatus::Serialization,
        AlsError::BlockOutOfRange { .. } => TalsStatus::OutOfRange,
        AlsError::CapExceeded { .. } | AlsError::NonFinite(_) | AlsError::InvalidArgument(_) => {
            TalsStatus::InvalidArgument
        }
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (TalsStatus, String)>) -> TalsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TalsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TalsStatus::Panic
        }
    }
}

fn als(e: AlsError) -> (TalsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TalsStatus, String) {
    (TalsStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn emit_problem(out: *mut *mut TalsProblem, p: ProblemInstance) {
    *out = Box::into_raw(Box::new(TalsProblem(p)));
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tals_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a problem from a JSON run configuration (gallery label with its
/// arguments, or an inline problem).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tals_problem_from_json(
    json: *const c_char,
    out: *mut *mut TalsProblem,
) -> TalsStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (TalsStatus::Serialization, e.to_string()))?;
        let cfg = RunConfig::from_json(s).map_err(als)?;
        let p = cfg.build_problem().map_err(als)?;
        emit_problem(out, p);
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tals_problem_mohlenkamp(tau: f64, out: *mut *mut TalsProblem) -> TalsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit_problem(out, gallery::mohlenkamp_example(tau).map_err(als)?);
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tals_problem_blambda(
    lambda: f64,
    n: usize,
    seed: u64,
    out: *mut *mut TalsProblem,
) -> TalsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit_problem(out, gallery::blambda_example(lambda, n, seed).map_err(als)?);
        Ok(())
    })
}

/// # Safety
/// `problem` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tals_problem_free(problem: *mut TalsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of parameter blocks, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tals_problem_num_blocks(problem: *const TalsProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.fmt.num_blocks())
}

/// Number of tensor entries, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tals_problem_tensor_len(problem: *const TalsProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.b.shape().len())
}

/// Runs ALS. A negative `angle_tol` disables the angle criterion.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tals_run(
    problem: *const TalsProblem,
    max_sweeps: usize,
    f_tol: f64,
    grad_tol: f64,
    angle_tol: f64,
    eps_rank: f64,
    out: *mut *mut TalsTrace,
) -> TalsStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let angle = (angle_tol >= 0.0).then_some(angle_tol);
        let stop = StopRule::new(max_sweeps, f_tol, grad_tol, angle).map_err(als)?;
        if !(eps_rank >= 0.0) {
            return Err((TalsStatus::InvalidArgument, "eps_rank must be ≥ 0".into()));
        }
        let trace = run(&p.0, stop, eps_rank).map_err(als)?;
        *out = Box::into_raw(Box::new(TalsTrace(trace)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tals_trace_free(trace: *mut TalsTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tals_trace_num_records(trace: *const TalsTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.records.len())
}

/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tals_trace_num_sweeps(trace: *const TalsTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.sweeps.len())
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tals_trace_termination(
    trace: *const TalsTrace,
    out: *mut TalsTermination,
) -> TalsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match t.0.termination {
            Termination::MaxSweeps => TalsTermination::MaxSweeps,
            Termination::FStalled => TalsTermination::FStalled,
            Termination::GradSmall => TalsTermination::GradSmall,
            Termination::AngleSmall => TalsTermination::AngleSmall,
            Termination::Degenerate => TalsTermination::Degenerate,
        };
        Ok(())
    })
}

/// Copies record `index` into `out`.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tals_trace_record(
    trace: *const TalsTrace,
    index: usize,
    out: *mut TalsRecord,
) -> TalsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = t.0.records.get(index).ok_or_else(|| {
            (
                TalsStatus::OutOfRange,
                format!("record {index} of {}", t.0.records.len()),
            )
        })?;
        *out = TalsRecord {
            sweep: r.k,
            mu: r.mu + 1,
            f: r.f,
            decrement: r.decrement,
            grad_norm: r.grad_norm,
            w_rank: r.w_rank,
            resid_orth: r.resid_orth,
            param_norm_max: r.param_norm_max,
            tan_angle: r.tan_angle.unwrap_or(f64::NAN),
            degenerate: r.degenerate,
        };
        Ok(())
    })
}

/// Writes up to `cap` per-sweep tangents (initial first) into `buf` and the
/// full series length into `len`. Pass `cap = 0` to query the length.
///
/// # Safety
/// `trace` must be a live handle; `buf` must hold `cap` doubles; `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tals_trace_tangents(
    trace: *const TalsTrace,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> TalsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let series = t.0.tangent_series();
        *len = series.len();
        if cap > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            let n = cap.min(series.len());
            ptr::copy_nonoverlapping(series.as_ptr(), buf, n);
        }
        Ok(())
    })
}

/// Windowed-median tangent ratio of the run and its classification.
///
/// # Safety
/// `trace` must be a live handle; `q_hat` and `class` writable.
#[no_mangle]
pub unsafe extern "C" fn tals_trace_rate(
    trace: *const TalsTrace,
    window: usize,
    q_hat: *mut f64,
    class: *mut TalsRateClass,
) -> TalsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let q_hat = q_hat.as_mut().ok_or_else(|| null("q_hat"))?;
        let class = class.as_mut().ok_or_else(|| null("class"))?;
        let est = rate_estimate(&t.0.tangent_series(), window).map_err(als)?;
        *q_hat = est.q_hat;
        *class = match est.class {
            RateClass::Superlinear => TalsRateClass::Superlinear,
            RateClass::Linear => TalsRateClass::Linear,
            RateClass::Sublinear => TalsRateClass::Sublinear,
            RateClass::Inconclusive => TalsRateClass::Inconclusive,
        };
        Ok(())
    })
}

/// The trace as CSV; free with [`tals_string_free`]. NULL on failure.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tals_trace_csv(trace: *const TalsTrace) -> *mut c_char {
    let Some(t) = trace.as_ref() else {
        set_error("trace is NULL".into());
        return ptr::null_mut();
    };
    CString::new(trace_csv(&t.0)).map_or(ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tals_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Micro-step rate `q_λ` of the `b_λ` family.
#[no_mangle]
pub extern "C" fn tals_q_lambda(lambda: f64) -> f64 {
    q_lambda_formula(lambda)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tals_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
