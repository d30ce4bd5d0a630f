//! C ABI over the simulator.
//!
//! Every entry point returns a [`PsStatus`]. On failure the message is kept in
//! a thread-local slot and can be fetched with [`ps_last_error`]. Strings
//! handed out by this library are owned by the caller and must be released
//! with [`ps_string_free`]. Structured data crosses the boundary as JSON.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use plaguesim::events::to_ndjson;
use plaguesim::intervention::Intervention;
use plaguesim::{Error, RunOptions, ScenarioConfig, Simulation};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Rejected = 5,
    Invalid = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque simulation handle.
pub struct PlagueSimulation {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Validation(_) => PsStatus::Validation,
            Error::Parse { .. } => PsStatus::Parse,
            Error::Io { .. } => PsStatus::Io,
            Error::Rejected(_) => PsStatus::Rejected,
            _ => PsStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure, and converts panics into [`PsStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(PsStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// # Safety
/// `p` is NULL or valid for writes for `'a`.
unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(PsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a>(p: *mut PlagueSimulation) -> Result<&'a mut PlagueSimulation, Failure> {
    out_arg(p, "simulation handle")
}

unsafe fn give_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let out = out_arg(out, "output string pointer")?;
    let c = CString::new(s).map_err(|e| Failure(PsStatus::Invalid, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// A scenario given either inline as JSON (starting with `{`) or as a bundled
/// name or file path.
fn scenario(text: &str) -> Result<ScenarioConfig, Failure> {
    let cfg = if text.trim_start().starts_with('{') { ScenarioConfig::from_json(text)? } else { ScenarioConfig::resolve(text)? };
    Ok(cfg)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// Message of the last failure on this thread, or NULL if none. Free with
/// [`ps_string_free`].
#[no_mangle]
pub extern "C" fn ps_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Crate version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a simulation at tick 0.
///
/// # Safety
/// `scenario_text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_new(
    scenario_text: *const c_char,
    seed: u64,
    record_events: bool,
    out: *mut *mut PlagueSimulation,
) -> PsStatus {
    guard(|| {
        let out = out_arg(out, "output handle pointer")?;
        let cfg = scenario(str_arg(scenario_text, "scenario")?)?;
        let sim = Simulation::new(cfg, seed, RunOptions { record_events, stop_after_index_cases: false })?;
        *out = Box::into_raw(Box::new(PlagueSimulation { sim }));
        Ok(())
    })
}

/// Destroys a handle. NULL is ignored.
///
/// # Safety
/// `sim` must come from [`ps_simulation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_free(sim: *mut PlagueSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances up to `n` ticks, stopping early once the run is finished. Writes
/// the current tick to `out_tick` when it is not NULL.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_step(sim: *mut PlagueSimulation, n: u64, out_tick: *mut u64) -> PsStatus {
    guard(|| {
        let h = handle(sim)?;
        for _ in 0..n {
            if !h.sim.step() {
                break;
            }
        }
        if !out_tick.is_null() {
            *out_tick = h.sim.tick();
        }
        Ok(())
    })
}

/// Steps until the run is finished.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_run_to_end(sim: *mut PlagueSimulation) -> PsStatus {
    guard(|| {
        handle(sim)?.sim.run_to_end();
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `out_tick` and `out_finished` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_status(sim: *mut PlagueSimulation, out_tick: *mut u64, out_finished: *mut bool) -> PsStatus {
    guard(|| {
        let h = handle(sim)?;
        *out_arg(out_tick, "out_tick")? = h.sim.tick();
        *out_arg(out_finished, "out_finished")? = h.sim.is_finished();
        Ok(())
    })
}

/// Queues an intervention (JSON, same shape as a scenario schedule entry
/// without `tick`) for the next tick. Writes that tick to `out_applies_at`
/// when it is not NULL.
///
/// # Safety
/// `sim` must be a live handle and `intervention_json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_submit(
    sim: *mut PlagueSimulation,
    intervention_json: *const c_char,
    out_applies_at: *mut u64,
) -> PsStatus {
    guard(|| {
        let h = handle(sim)?;
        let text = str_arg(intervention_json, "intervention")?;
        let iv: Intervention = serde_json::from_str(text).map_err(|e| Failure(PsStatus::Parse, e.to_string()))?;
        let at = h.sim.submit(iv)?;
        if !out_applies_at.is_null() {
            *out_applies_at = at;
        }
        Ok(())
    })
}

/// Latest tick snapshot as JSON.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_snapshot_json(sim: *mut PlagueSimulation, out: *mut *mut c_char) -> PsStatus {
    guard(|| give_string(json(handle(sim)?.sim.latest_snapshot()), out))
}

/// Run summary so far as JSON.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_summary_json(sim: *mut PlagueSimulation, out: *mut *mut c_char) -> PsStatus {
    guard(|| give_string(json(&handle(sim)?.sim.summary()), out))
}

/// Event log as NDJSON; empty unless the handle records events.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_simulation_events_ndjson(sim: *mut PlagueSimulation, out: *mut *mut c_char) -> PsStatus {
    guard(|| give_string(to_ndjson(handle(sim)?.sim.events()), out))
}

/// Runs a scenario to the end in one call and returns its summary as JSON.
///
/// # Safety
/// `scenario_text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_run_summary_json(scenario_text: *const c_char, seed: u64, out: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let cfg = scenario(str_arg(scenario_text, "scenario")?)?;
        let r = plaguesim::run_with(&cfg, seed, RunOptions::default())?;
        give_string(json(&r.summary), out)
    })
}
