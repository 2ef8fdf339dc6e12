use std::ffi::{CStr, CString};
use std::ptr;

use adaftrl_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = adaftrl_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn new_learner(learner: &str, set: &str) -> Result<*mut AdaftrlLearner, (AdaftrlStatus, String)> {
    let mut h = ptr::null_mut();
    let st = unsafe { adaftrl_learner_new(c(learner).as_ptr(), c(set).as_ptr(), 0, &mut h) };
    if st == AdaftrlStatus::Ok {
        Ok(h)
    } else {
        Err((st, last_error()))
    }
}

fn x_of(h: *const AdaftrlLearner) -> Vec<f64> {
    let d = unsafe { adaftrl_learner_dim(h) };
    let mut x = vec![0.0; d];
    assert_eq!(unsafe { adaftrl_learner_x(h, x.as_mut_ptr(), d) }, AdaftrlStatus::Ok);
    x
}

#[test]
fn ogd_matches_projected_closed_form() {
    let eta = 0.2;
    let h = new_learner(&format!(r#"{{"preset":"ogd","eta":{eta}}}"#), r#"{"kind":"ball","center":[0,0],"radius":1}"#).unwrap();
    assert_eq!(unsafe { adaftrl_learner_dim(h) }, 2);
    let gs = [[1.0, -0.5], [0.3, 0.8], [-2.0, 0.1], [0.7, 0.7]];
    let mut sum = [0.0, 0.0];
    for g in gs {
        assert_eq!(unsafe { adaftrl_learner_step(h, g.as_ptr(), 2) }, AdaftrlStatus::Ok);
        sum[0] += g[0];
        sum[1] += g[1];
        let y = [-eta * sum[0], -eta * sum[1]];
        let n = (y[0] * y[0] + y[1] * y[1]).sqrt().max(1.0);
        let x = x_of(h);
        assert!((x[0] - y[0] / n).abs() < 1e-12 && (x[1] - y[1] / n).abs() < 1e-12, "{x:?}");
    }
    assert_eq!(unsafe { adaftrl_learner_round(h) }, 4);
    unsafe { adaftrl_learner_free(h) };
}

#[test]
fn step_loss_drives_implicit_presets() {
    let h = new_learner(r#"{"preset":"implicit-md","eta":1.0}"#, r#"{"kind":"unconstrained","dim":1}"#).unwrap();
    // Gradient-only feedback is not enough for implicit updates.
    let g = [1.0];
    assert_eq!(unsafe { adaftrl_learner_step(h, g.as_ptr(), 1) }, AdaftrlStatus::InvalidConfig);
    assert!(last_error().contains("implicit"));
    let loss = c(r#"{"kind":"quadratic","center":[2.0]}"#);
    assert_eq!(unsafe { adaftrl_learner_step_loss(h, loss.as_ptr()) }, AdaftrlStatus::Ok);
    // argmin ½(x-2)² + ½(x-0)² = 1
    assert!((x_of(h)[0] - 1.0).abs() < 1e-9);
    unsafe { adaftrl_learner_free(h) };
}

#[test]
fn errors_map_to_status_codes() {
    assert_eq!(
        new_learner(r#"{"preset":"ogd","eta":-1}"#, r#"{"kind":"unconstrained","dim":2}"#).unwrap_err().0,
        AdaftrlStatus::InvalidConfig
    );
    let (st, msg) = new_learner("{not json", r#"{"kind":"unconstrained","dim":2}"#).unwrap_err();
    assert_eq!(st, AdaftrlStatus::InvalidJson);
    assert!(msg.contains("learner_json"));

    let mut h = ptr::null_mut();
    let st = unsafe { adaftrl_learner_new(ptr::null(), ptr::null(), 0, &mut h) };
    assert_eq!(st, AdaftrlStatus::NullPointer);

    let h = new_learner(r#"{"preset":"ogd","eta":1}"#, r#"{"kind":"unconstrained","dim":2}"#).unwrap();
    let g = [1.0, 2.0, 3.0];
    assert_eq!(unsafe { adaftrl_learner_step(h, g.as_ptr(), 3) }, AdaftrlStatus::DimensionMismatch);
    let g = [f64::NAN, 0.0];
    assert_eq!(unsafe { adaftrl_learner_step(h, g.as_ptr(), 2) }, AdaftrlStatus::Numeric);
    assert_eq!(unsafe { adaftrl_learner_round(h) }, 0);
    let mut x = [0.0; 1];
    assert_eq!(unsafe { adaftrl_learner_x(h, x.as_mut_ptr(), 1) }, AdaftrlStatus::DimensionMismatch);
    // A successful call clears the message.
    let g = [1.0, 2.0];
    assert_eq!(unsafe { adaftrl_learner_step(h, g.as_ptr(), 2) }, AdaftrlStatus::Ok);
    assert!(adaftrl_last_error().is_null());
    unsafe { adaftrl_learner_free(h) };
    unsafe { adaftrl_learner_free(ptr::null_mut()) };
}

#[test]
fn status_names_and_version() {
    let name = |s| unsafe { CStr::from_ptr(adaftrl_status_name(s)) }.to_str().unwrap();
    assert_eq!(name(AdaftrlStatus::Ok), "ok");
    assert_eq!(name(AdaftrlStatus::BoundViolated), "bound_violated");
    let v = unsafe { CStr::from_ptr(adaftrl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_config_returns_report() {
    let cfg = c(r#"{
        "name": "ffi-run",
        "learner": {"preset": "ogd", "eta": 0.1},
        "sequence": {"kind": "random-signs", "dim": 3, "magnitude": 0.5},
        "set": {"kind": "ball", "center": [0, 0, 0], "radius": 1},
        "T": 50, "seeds": [1, 2], "bounds": ["oo-ftrl"]
    }"#);
    let mut out = ptr::null_mut();
    let st = unsafe { adaftrl_run_config(cfg.as_ptr(), 1, &mut out) };
    assert_eq!(st, AdaftrlStatus::Ok, "{:?}", adaftrl_last_error());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { adaftrl_string_free(out) };
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["name"], "ffi-run");
    assert_eq!(report["cells"].as_array().unwrap().len(), 2);
    assert_eq!(report["bounds"][0]["holds"], true);

    let bad = c(r#"{"name":"x"}"#);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { adaftrl_run_config(bad.as_ptr(), 1, &mut out) }, AdaftrlStatus::InvalidJson);
    assert!(out.is_null());
}
