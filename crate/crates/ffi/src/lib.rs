//! C ABI over `domlp`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every function returns a
//! [`DomlpError`] code; on failure a message for the calling thread is
//! available from [`domlp_last_error_message`] until the next call.
//! Panics are caught at the boundary and reported as `DOMLP_ERROR_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use domlp::alp::sample_count;
use domlp::average::{solve_average, solve_average_unconstrained};
use domlp::discounted::{solve_discounted, solve_discounted_unconstrained};
use domlp::dominance::check_icv;
use domlp::io::{load_problem, parse_problem, report_json, to_json_string, Problem};
use domlp::lp::LpStatus;
use domlp::mdp::{Distribution, Mode};
use domlp::occupation::{DominanceSpec, SolveReport};
use domlp::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomlpError {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidInput = 4,
    Io = 5,
    NotOptimal = 6,
    BufferTooSmall = 7,
    Solver = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomlpStatus {
    Optimal = 0,
    Infeasible = 1,
    Unbounded = 2,
}

/// A parsed instance with its optional benchmark.
pub struct DomlpInstance {
    problem: Problem,
}

/// Result of [`domlp_solve`].
pub struct DomlpReport {
    report: SolveReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn code_of(e: &Error) -> DomlpError {
    match e {
        Error::Json(_) => DomlpError::Parse,
        Error::Io(_) => DomlpError::Io,
        Error::IterationLimit(_) | Error::SingularBasis => DomlpError::Solver,
        _ => DomlpError::InvalidInput,
    }
}

/// Runs `f`, converting errors and panics into codes and messages.
fn guard(f: impl FnOnce() -> Result<(), (DomlpError, String)>) -> DomlpError {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DomlpError::Ok,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            DomlpError::Panic
        }
    }
}

fn lib_err(e: Error) -> (DomlpError, String) {
    (code_of(&e), e.to_string())
}

fn null() -> (DomlpError, String) {
    (DomlpError::NullPointer, "null pointer argument".into())
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, (DomlpError, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|e| (DomlpError::InvalidUtf8, e.to_string()))
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, (DomlpError, String)> {
    p.as_mut().ok_or_else(null)
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize) -> Result<&'a [f64], (DomlpError, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn domlp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Parses an instance from a NUL-terminated JSON string.
#[no_mangle]
pub unsafe extern "C" fn domlp_instance_from_json(json: *const c_char, out: *mut *mut DomlpInstance) -> DomlpError {
    guard(|| {
        let out = out_arg(out)?;
        let problem = parse_problem(str_arg(json)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DomlpInstance { problem }));
        Ok(())
    })
}

/// Reads an instance file.
#[no_mangle]
pub unsafe extern "C" fn domlp_instance_from_file(path: *const c_char, out: *mut *mut DomlpInstance) -> DomlpError {
    guard(|| {
        let out = out_arg(out)?;
        let problem = load_problem(Path::new(str_arg(path)?)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DomlpInstance { problem }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn domlp_instance_num_states(inst: *const DomlpInstance, out: *mut usize) -> DomlpError {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        *out_arg(out)? = inst.problem.instance.num_states;
        Ok(())
    })
}

/// Number of state-action pairs, the length of the occupation vector.
#[no_mangle]
pub unsafe extern "C" fn domlp_instance_num_pairs(inst: *const DomlpInstance, out: *mut usize) -> DomlpError {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        *out_arg(out)? = inst.problem.instance.pairs().len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn domlp_instance_free(inst: *mut DomlpInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Solves the instance in its own mode against its benchmark (or
/// without dominance rows when it has none). Infeasible and unbounded
/// problems still produce a report; check [`domlp_report_status`].
#[no_mangle]
pub unsafe extern "C" fn domlp_solve(inst: *const DomlpInstance, out: *mut *mut DomlpReport) -> DomlpError {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        let out = out_arg(out)?;
        let p = &inst.problem;
        let report = match (p.instance.mode, &p.spec) {
            (Mode::Average, Some(s)) => solve_average(&p.instance, s),
            (Mode::Discounted, Some(s)) => solve_discounted(&p.instance, s),
            (Mode::Average, None) => solve_average_unconstrained(&p.instance),
            (Mode::Discounted, None) => solve_discounted_unconstrained(&p.instance),
        }
        .map_err(lib_err)?;
        let bench = match &p.spec {
            Some(DominanceSpec::Scalar(b)) => Some(b),
            _ => None,
        };
        let text = to_json_string(&report_json(&report, &p.instance, bench, &p.extra_grid)).map_err(lib_err)?;
        let json = CString::new(text).map_err(|e| (DomlpError::Solver, e.to_string()))?;
        *out = Box::into_raw(Box::new(DomlpReport { report, json }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn domlp_report_status(rep: *const DomlpReport, out: *mut DomlpStatus) -> DomlpError {
    guard(|| {
        let rep = rep.as_ref().ok_or_else(null)?;
        *out_arg(out)? = match rep.report.status {
            LpStatus::Optimal => DomlpStatus::Optimal,
            LpStatus::Infeasible => DomlpStatus::Infeasible,
            LpStatus::Unbounded => DomlpStatus::Unbounded,
        };
        Ok(())
    })
}

unsafe fn optimal_value(rep: *const DomlpReport, out: *mut f64, f: impl FnOnce(&SolveReport) -> f64) -> DomlpError {
    guard(|| {
        let rep = rep.as_ref().ok_or_else(null)?;
        let out = out_arg(out)?;
        if !rep.report.is_optimal() {
            return Err((DomlpError::NotOptimal, format!("report status is {}", rep.report.status.as_str())));
        }
        *out = f(&rep.report);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn domlp_report_objective(rep: *const DomlpReport, out: *mut f64) -> DomlpError {
    optimal_value(rep, out, |r| r.objective)
}

#[no_mangle]
pub unsafe extern "C" fn domlp_report_dual_objective(rep: *const DomlpReport, out: *mut f64) -> DomlpError {
    optimal_value(rep, out, |r| r.dual_objective)
}

#[no_mangle]
pub unsafe extern "C" fn domlp_report_gap(rep: *const DomlpReport, out: *mut f64) -> DomlpError {
    optimal_value(rep, out, |r| r.gap)
}

/// Copies the occupation measure (pair order: states ascending, actions
/// in file order) into `buf`, which must hold `len >= num_pairs` values.
#[no_mangle]
pub unsafe extern "C" fn domlp_report_occupation(rep: *const DomlpReport, buf: *mut f64, len: usize) -> DomlpError {
    guard(|| {
        let rep = rep.as_ref().ok_or_else(null)?;
        let occ = rep
            .report
            .occupation
            .as_ref()
            .ok_or_else(|| (DomlpError::NotOptimal, "report has no occupation measure".to_string()))?;
        if len < occ.values.len() {
            return Err((DomlpError::BufferTooSmall, format!("need {} values, got {len}", occ.values.len())));
        }
        if buf.is_null() {
            return Err(null());
        }
        std::slice::from_raw_parts_mut(buf, occ.values.len()).copy_from_slice(&occ.values);
        Ok(())
    })
}

/// Number of dominance rows (and utility multipliers).
#[no_mangle]
pub unsafe extern "C" fn domlp_report_num_multipliers(rep: *const DomlpReport, out: *mut usize) -> DomlpError {
    guard(|| {
        let rep = rep.as_ref().ok_or_else(null)?;
        *out_arg(out)? = rep.report.dual.as_ref().map_or(0, |d| d.lambda().len());
        Ok(())
    })
}

/// Copies `(eta, lambda)` per dominance row into two buffers of length `len`.
#[no_mangle]
pub unsafe extern "C" fn domlp_report_multipliers(
    rep: *const DomlpReport,
    etas: *mut f64,
    weights: *mut f64,
    len: usize,
) -> DomlpError {
    guard(|| {
        let rep = rep.as_ref().ok_or_else(null)?;
        let lambda = rep
            .report
            .dual
            .as_ref()
            .ok_or_else(|| (DomlpError::NotOptimal, "report has no dual solution".to_string()))?
            .lambda();
        if len < lambda.len() {
            return Err((DomlpError::BufferTooSmall, format!("need {} values, got {len}", lambda.len())));
        }
        if lambda.is_empty() {
            return Ok(());
        }
        if etas.is_null() || weights.is_null() {
            return Err(null());
        }
        let e = std::slice::from_raw_parts_mut(etas, lambda.len());
        let w = std::slice::from_raw_parts_mut(weights, lambda.len());
        for (i, (k, v)) in lambda.iter().enumerate() {
            e[i] = k.eta;
            w[i] = *v;
        }
        Ok(())
    })
}

/// Borrowed JSON rendering of the report, valid until the report is freed.
#[no_mangle]
pub unsafe extern "C" fn domlp_report_json(rep: *const DomlpReport, out: *mut *const c_char) -> DomlpError {
    guard(|| {
        let rep = rep.as_ref().ok_or_else(null)?;
        *out_arg(out)? = rep.json.as_ptr();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn domlp_report_free(rep: *mut DomlpReport) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}

/// Constraint-sample bound `ceil((4/eps) (k ln(12/eps) + ln(2/delta)))`.
#[no_mangle]
pub unsafe extern "C" fn domlp_sample_count(epsilon: f64, delta: f64, k: usize, out: *mut usize) -> DomlpError {
    guard(|| {
        *out_arg(out)? = sample_count(epsilon, delta, k).map_err(lib_err)?;
        Ok(())
    })
}

/// Increasing concave dominance of `X` over `Y` checked at the support of
/// `Y`. `holds` receives 1 or 0, `worst_margin` the smallest margin.
#[no_mangle]
pub unsafe extern "C" fn domlp_check_icv(
    x_support: *const f64,
    x_probs: *const f64,
    x_len: usize,
    y_support: *const f64,
    y_probs: *const f64,
    y_len: usize,
    holds: *mut i32,
    worst_margin: *mut f64,
) -> DomlpError {
    guard(|| {
        let x = Distribution::new(slice_arg(x_support, x_len)?.to_vec(), slice_arg(x_probs, x_len)?.to_vec()).map_err(lib_err)?;
        let y = Distribution::new(slice_arg(y_support, y_len)?.to_vec(), slice_arg(y_probs, y_len)?.to_vec()).map_err(lib_err)?;
        let holds = out_arg(holds)?;
        let worst = out_arg(worst_margin)?;
        let c = check_icv(&x, &y);
        *holds = i32::from(c.holds);
        *worst = c.worst_margin;
        Ok(())
    })
}
