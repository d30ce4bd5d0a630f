use std::ffi::{c_char, CStr, CString};
use std::ptr;

use plaguesim_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { ps_string_free(s) };
    out
}

fn last_error() -> String {
    take(ps_last_error())
}

fn new_sim(scenario: &str, seed: u64, events: bool) -> Result<*mut PlagueSimulation, (PsStatus, String)> {
    let text = CString::new(scenario).unwrap();
    let mut h = ptr::null_mut();
    match unsafe { ps_simulation_new(text.as_ptr(), seed, events, &mut h) } {
        PsStatus::Ok => Ok(h),
        s => Err((s, last_error())),
    }
}

#[test]
fn lifecycle_matches_the_rust_api() {
    let h = new_sim("smallpox", 3, true).unwrap();
    let mut tick = 0;
    assert_eq!(unsafe { ps_simulation_step(h, 10, &mut tick) }, PsStatus::Ok);
    assert_eq!(tick, 10);

    let iv = CString::new(r#"{"kind":"symptom_mask","uptake_probability_per_tick":0.5}"#).unwrap();
    let mut at = 0;
    assert_eq!(unsafe { ps_simulation_submit(h, iv.as_ptr(), &mut at) }, PsStatus::Ok);
    assert_eq!(at, 11);

    assert_eq!(unsafe { ps_simulation_run_to_end(h) }, PsStatus::Ok);
    let (mut t, mut done) = (0, false);
    assert_eq!(unsafe { ps_simulation_status(h, &mut t, &mut done) }, PsStatus::Ok);
    assert!(done);

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ps_simulation_snapshot_json(h, &mut s) }, PsStatus::Ok);
    let snap: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
    assert_eq!(snap["tick"], t);

    assert_eq!(unsafe { ps_simulation_events_ndjson(h, &mut s) }, PsStatus::Ok);
    let log = take(s);

    // Same run through the library directly.
    let cfg = plaguesim::ScenarioConfig::bundled("smallpox").unwrap();
    let mut sim = plaguesim::Simulation::new(cfg, 3, plaguesim::RunOptions { record_events: true, stop_after_index_cases: false }).unwrap();
    for _ in 0..10 {
        sim.step();
    }
    sim.submit(plaguesim::intervention::Intervention::SymptomMask { uptake_probability_per_tick: 0.5 }).unwrap();
    sim.run_to_end();
    assert_eq!(log, plaguesim::events::to_ndjson(sim.events()));

    assert_eq!(unsafe { ps_simulation_summary_json(h, &mut s) }, PsStatus::Ok);
    let summary: plaguesim::metrics::RunSummary = serde_json::from_str(&take(s)).unwrap();
    assert_eq!(summary, sim.summary());
    unsafe { ps_simulation_free(h) };
}

#[test]
fn one_shot_run_accepts_inline_json() {
    let mut cfg = plaguesim::ScenarioConfig::bundled("homogeneous-baseline").unwrap();
    cfg.population.count = 100;
    let text = CString::new(cfg.to_json()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ps_run_summary_json(text.as_ptr(), 4, &mut s) }, PsStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
    assert_eq!(v["population"], 100);
}

#[test]
fn failures_carry_codes_and_messages() {
    let (code, msg) = new_sim("{\"name\": 3}", 1, false).unwrap_err();
    assert_eq!(code, PsStatus::Parse);
    assert!(msg.contains("parse error"), "{msg}");

    let mut bad = plaguesim::ScenarioConfig::bundled("smallpox").unwrap();
    bad.disease.stages[1].duration_min_days = 20;
    let (code, _) = new_sim(&serde_json::to_string(&bad).unwrap(), 1, false).unwrap_err();
    assert_eq!(code, PsStatus::Validation);

    let (code, _) = new_sim("no-such-scenario", 1, false).unwrap_err();
    assert_eq!(code, PsStatus::Io);

    let h = new_sim("gray-plague", 1, false).unwrap();
    let iv = CString::new(r#"{"kind":"area_restriction","zones":["atlantis"]}"#).unwrap();
    assert_eq!(unsafe { ps_simulation_submit(h, iv.as_ptr(), ptr::null_mut()) }, PsStatus::Rejected);
    assert!(last_error().contains("atlantis"));
    let iv = CString::new("{").unwrap();
    assert_eq!(unsafe { ps_simulation_submit(h, iv.as_ptr(), ptr::null_mut()) }, PsStatus::Parse);
    unsafe { ps_simulation_free(h) };
}

#[test]
fn null_and_non_utf8_arguments_are_rejected() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ps_simulation_new(ptr::null(), 1, false, &mut h) }, PsStatus::NullPointer);
    let name = CString::new("smallpox").unwrap();
    assert_eq!(unsafe { ps_simulation_new(name.as_ptr(), 1, false, ptr::null_mut()) }, PsStatus::NullPointer);
    let bytes = CString::new(vec![0xffu8, 0xfe]).unwrap();
    assert_eq!(unsafe { ps_simulation_new(bytes.as_ptr(), 1, false, &mut h) }, PsStatus::InvalidUtf8);
    assert_eq!(unsafe { ps_simulation_step(ptr::null_mut(), 1, ptr::null_mut()) }, PsStatus::NullPointer);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ps_simulation_snapshot_json(ptr::null_mut(), &mut s) }, PsStatus::NullPointer);
    assert!(s.is_null());
    unsafe {
        ps_simulation_free(ptr::null_mut());
        ps_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(ps_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/plaguesim.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct PlagueSimulation PlagueSimulation;"));
    assert!(header.contains("PS_STATUS_VALIDATION = 4"));
}
