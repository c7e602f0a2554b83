use std::ffi::{CStr, CString};
use std::ptr;

use domlp_ffi::*;

const TI1: &str = r#"{
  "states": 1,
  "actions": [["a", "b"]],
  "P": [[[1.0], [1.0]]],
  "r": [[2.0, 5.0]],
  "z": [[10.0, 0.0]],
  "mode": "average",
  "benchmark": {"support": [4.0], "probs": [1.0]}
}"#;

fn load(json: &str) -> *mut DomlpInstance {
    let c = CString::new(json).unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { domlp_instance_from_json(c.as_ptr(), &mut inst) }, DomlpError::Ok);
    assert!(!inst.is_null());
    inst
}

fn last_error() -> String {
    let p = domlp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn solve_single_state_instance() {
    let inst = load(TI1);
    unsafe {
        let mut n = 0usize;
        assert_eq!(domlp_instance_num_states(inst, &mut n), DomlpError::Ok);
        assert_eq!(n, 1);
        assert_eq!(domlp_instance_num_pairs(inst, &mut n), DomlpError::Ok);
        assert_eq!(n, 2);

        let mut rep = ptr::null_mut();
        assert_eq!(domlp_solve(inst, &mut rep), DomlpError::Ok);
        let mut status = DomlpStatus::Infeasible;
        assert_eq!(domlp_report_status(rep, &mut status), DomlpError::Ok);
        assert_eq!(status, DomlpStatus::Optimal);

        let mut obj = f64::NAN;
        assert_eq!(domlp_report_objective(rep, &mut obj), DomlpError::Ok);
        assert!((obj - 2.0).abs() < 1e-9);
        let mut gap = f64::NAN;
        assert_eq!(domlp_report_gap(rep, &mut gap), DomlpError::Ok);
        assert!(gap.abs() < 1e-9);

        let mut x = [f64::NAN; 2];
        assert_eq!(domlp_report_occupation(rep, x.as_mut_ptr(), 2), DomlpError::Ok);
        assert!((x[0] - 1.0).abs() < 1e-9 && x[1].abs() < 1e-9);
        assert_eq!(domlp_report_occupation(rep, x.as_mut_ptr(), 1), DomlpError::BufferTooSmall);

        let mut m = 0usize;
        assert_eq!(domlp_report_num_multipliers(rep, &mut m), DomlpError::Ok);
        assert_eq!(m, 1);
        let (mut eta, mut w) = ([0.0], [0.0]);
        assert_eq!(domlp_report_multipliers(rep, eta.as_mut_ptr(), w.as_mut_ptr(), 1), DomlpError::Ok);
        assert_eq!(eta[0], 4.0);
        assert!((w[0] - 0.75).abs() < 1e-9);

        let mut json = ptr::null();
        assert_eq!(domlp_report_json(rep, &mut json), DomlpError::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["status"], "optimal");

        domlp_report_free(rep);
        domlp_instance_free(inst);
    }
}

#[test]
fn infeasible_report_has_no_objective() {
    let inst = load(&TI1.replace("\"support\": [4.0]", "\"support\": [11.0]"));
    unsafe {
        let mut rep = ptr::null_mut();
        assert_eq!(domlp_solve(inst, &mut rep), DomlpError::Ok);
        let mut status = DomlpStatus::Optimal;
        domlp_report_status(rep, &mut status);
        assert_eq!(status, DomlpStatus::Infeasible);
        let mut obj = 0.0;
        assert_eq!(domlp_report_objective(rep, &mut obj), DomlpError::NotOptimal);
        assert!(last_error().contains("infeasible"));
        domlp_report_free(rep);
        domlp_instance_free(inst);
    }
}

#[test]
fn bad_inputs_set_codes_and_messages() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(domlp_instance_from_json(ptr::null(), &mut inst), DomlpError::NullPointer);
        let junk = CString::new("{not json").unwrap();
        assert_eq!(domlp_instance_from_json(junk.as_ptr(), &mut inst), DomlpError::Parse);
        assert!(inst.is_null());
        assert!(!last_error().is_empty());

        let bad = CString::new(TI1.replace("[[[1.0], [1.0]]]", "[[[0.5], [1.0]]]")).unwrap();
        assert_eq!(domlp_instance_from_json(bad.as_ptr(), &mut inst), DomlpError::InvalidInput);

        let missing = CString::new("/nonexistent/instance.json").unwrap();
        assert_eq!(domlp_instance_from_file(missing.as_ptr(), &mut inst), DomlpError::Io);

        let mut n = 0usize;
        assert_eq!(domlp_instance_num_states(ptr::null(), &mut n), DomlpError::NullPointer);
        domlp_instance_free(ptr::null_mut());
        domlp_report_free(ptr::null_mut());
    }
}

#[test]
fn error_is_cleared_on_success() {
    unsafe {
        let mut n = 0usize;
        domlp_instance_num_states(ptr::null(), &mut n);
        assert!(!domlp_last_error_message().is_null());
        assert_eq!(domlp_sample_count(0.25, 0.1, 4, &mut n), DomlpError::Ok);
        assert!(domlp_last_error_message().is_null());
        assert_eq!(n, 296);
        assert_eq!(domlp_sample_count(0.0, 0.05, 2, &mut n), DomlpError::InvalidInput);
    }
}

#[test]
fn file_loading() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/ti1.json");
    let c = CString::new(path).unwrap();
    let mut inst = ptr::null_mut();
    unsafe {
        assert_eq!(domlp_instance_from_file(c.as_ptr(), &mut inst), DomlpError::Ok);
        domlp_instance_free(inst);
    }
}

#[test]
fn icv_check() {
    let (xs, xp) = ([0.0, 10.0], [0.5, 0.5]);
    let (ys, yp) = ([5.0], [1.0]);
    let (mut holds, mut worst) = (-1, f64::NAN);
    unsafe {
        let rc = domlp_check_icv(ys.as_ptr(), yp.as_ptr(), 1, xs.as_ptr(), xp.as_ptr(), 2, &mut holds, &mut worst);
        assert_eq!(rc, DomlpError::Ok);
        assert_eq!(holds, 1);
        let rc = domlp_check_icv(xs.as_ptr(), xp.as_ptr(), 2, ys.as_ptr(), yp.as_ptr(), 1, &mut holds, &mut worst);
        assert_eq!(rc, DomlpError::Ok);
        assert_eq!(holds, 0);
        // E(X - 5)_- = -2.5 against 0
        assert!((worst + 2.5).abs() < 1e-12);
        let bad = [0.7];
        let rc = domlp_check_icv(ys.as_ptr(), bad.as_ptr(), 1, xs.as_ptr(), xp.as_ptr(), 2, &mut holds, &mut worst);
        assert_eq!(rc, DomlpError::InvalidInput);
    }
}

#[test]
fn header_declares_entry_points() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/domlp.h")).unwrap();
    for name in ["domlp_instance_from_json", "domlp_solve", "domlp_report_occupation", "domlp_check_icv", "typedef struct DomlpReport DomlpReport"] {
        assert!(h.contains(name), "{name}");
    }
}
