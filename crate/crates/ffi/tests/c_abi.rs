use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use tensor_als_ffi::*;

fn run_mohlenkamp(tau: f64) -> *mut TalsTrace {
    let mut problem = ptr::null_mut();
    let mut trace = ptr::null_mut();
    unsafe {
        assert_eq!(tals_problem_mohlenkamp(tau, &mut problem), TalsStatus::Ok);
        assert_eq!(tals_problem_num_blocks(problem), 3);
        assert_eq!(tals_problem_tensor_len(problem), 8);
        let status = tals_run(problem, 30, 0.0, 0.0, 1e-12, 1e-12, &mut trace);
        assert_eq!(status, TalsStatus::Ok);
        tals_problem_free(problem);
    }
    trace
}

#[test]
fn run_and_inspect_trace() {
    let trace = run_mohlenkamp(0.4);
    unsafe {
        let mut term = TalsTermination::MaxSweeps;
        assert_eq!(tals_trace_termination(trace, &mut term), TalsStatus::Ok);
        assert_eq!(term, TalsTermination::AngleSmall);
        let n = tals_trace_num_records(trace);
        assert_eq!(n, 3 * tals_trace_num_sweeps(trace));
        let mut rec = std::mem::zeroed::<TalsRecord>();
        assert_eq!(tals_trace_record(trace, 0, &mut rec), TalsStatus::Ok);
        assert_eq!((rec.sweep, rec.mu), (1, 1));
        assert!(rec.decrement <= 0.0);
        assert!(rec.tan_angle.is_nan());
        assert_eq!(tals_trace_record(trace, 2, &mut rec), TalsStatus::Ok);
        assert!(rec.tan_angle.is_finite());
        assert_eq!(tals_trace_record(trace, n, &mut rec), TalsStatus::OutOfRange);
        assert!(!tals_last_error().is_null());

        let mut len = 0usize;
        assert_eq!(tals_trace_tangents(trace, ptr::null_mut(), 0, &mut len), TalsStatus::Ok);
        let mut buf = vec![0.0; len];
        assert_eq!(tals_trace_tangents(trace, buf.as_mut_ptr(), len, &mut len), TalsStatus::Ok);
        assert_eq!(buf[0], 0.4);
        assert!(*buf.last().unwrap() <= 1e-12);

        let csv = tals_trace_csv(trace);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
        tals_string_free(csv);
        assert!(text.starts_with("sweep,mu,f,"));
        assert_eq!(text.lines().count(), n + 1);
        tals_trace_free(trace);
    }
}

#[test]
fn rate_through_the_abi() {
    let mut problem = ptr::null_mut();
    let mut trace = ptr::null_mut();
    unsafe {
        assert_eq!(tals_problem_blambda(0.46, 8, 7, &mut problem), TalsStatus::Ok);
        assert_eq!(tals_run(problem, 400, 0.0, 0.0, 1e-13, 1e-12, &mut trace), TalsStatus::Ok);
        let mut q = 0.0;
        let mut class = TalsRateClass::Inconclusive;
        assert_eq!(tals_trace_rate(trace, 10, &mut q, &mut class), TalsStatus::Ok);
        assert!((q - tals_q_lambda(0.46)).abs() < 0.01);
        assert_eq!(class, TalsRateClass::Linear);
        assert_eq!(tals_trace_rate(trace, 100_000, &mut q, &mut class), TalsStatus::SeriesTooShort);
        tals_trace_free(trace);
        tals_problem_free(problem);
    }
}

#[test]
fn json_config_and_errors() {
    let mut problem = ptr::null_mut();
    unsafe {
        let ok = CString::new(r#"{"gallery":"desilva_lim","n":3}"#).unwrap();
        assert_eq!(tals_problem_from_json(ok.as_ptr(), &mut problem), TalsStatus::Ok);
        assert_eq!(tals_problem_tensor_len(problem), 27);
        tals_problem_free(problem);

        let bad = CString::new(r#"{"gallery":"desilva_lim","n":1}"#).unwrap();
        assert_eq!(
            tals_problem_from_json(bad.as_ptr(), &mut problem),
            TalsStatus::InvalidArgument
        );
        let msg = CStr::from_ptr(tals_last_error()).to_str().unwrap();
        assert!(msg.contains("n ≥ 2"), "{msg}");

        let garbage = CString::new("{not json").unwrap();
        assert_eq!(
            tals_problem_from_json(garbage.as_ptr(), &mut problem),
            TalsStatus::Serialization
        );
        assert_eq!(tals_problem_from_json(ptr::null(), &mut problem), TalsStatus::NullPointer);
        assert_eq!(tals_problem_mohlenkamp(-1.0, &mut problem), TalsStatus::InvalidArgument);

        let mut trace = ptr::null_mut();
        assert_eq!(
            tals_run(ptr::null(), 10, 0.0, 0.0, -1.0, 1e-12, &mut trace),
            TalsStatus::NullPointer
        );
        assert_eq!(tals_problem_mohlenkamp(0.4, &mut problem), TalsStatus::Ok);
        assert_eq!(
            tals_run(problem, 0, 0.0, 0.0, -1.0, 1e-12, &mut trace),
            TalsStatus::InvalidArgument
        );
        tals_problem_free(problem);
        tals_problem_free(ptr::null_mut());
        tals_trace_free(ptr::null_mut());
        tals_string_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(tals_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let src = r#"
#include "tensor_als.h"
int main(void) {
    TalsProblem *p = 0;
    TalsTrace *t = 0;
    TalsRecord r;
    if (tals_problem_mohlenkamp(0.4, &p) != TALS_STATUS_OK) return 1;
    if (tals_run(p, 10, 0.0, 0.0, -1.0, 1e-12, &t) != TALS_STATUS_OK) return 2;
    tals_trace_record(t, 0, &r);
    tals_trace_free(t);
    tals_problem_free(p);
    return (int)r.w_rank - 1;
}
"#;
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("smoke.c");
    std::fs::write(&file, src).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&file)
        .status()
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping header check: cannot run {cc}: {e}");
            return;
        }
    };
    assert!(status.success());
}
