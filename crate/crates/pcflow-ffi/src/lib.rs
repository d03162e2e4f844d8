//! C ABI for the pcflow library: opaque simulation handles, integer status
//! codes, and a thread-local error message.
//!
//! Every function returns `PcflowStatus` (0 = success); on failure the
//! message from `pcflow_last_error_message` describes the cause. Handles
//! are created by `pcflow_sim_new` / `pcflow_sim_load_snapshot` and must be
//! released with `pcflow_sim_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use pcflow::chart::TorusChart;
use pcflow::flow::{self, DiagnosticsRecord, FlowControls, FlowState, RunOutcome};
use pcflow::identity::{self, CaseId, SuiteConfig};
use pcflow::initial::{self, DataKind, DataSpec};

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum PcflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    PositivityViolation = 3,
    PositivityBreakdown = 4,
    IoError = 5,
    InternalPanic = 6,
}

/// Opaque simulation handle: one flow trajectory plus its diagnostics.
pub struct PcflowSim {
    state: FlowState,
    records: Vec<DiagnosticsRecord>,
    outcome: RunOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &pcflow::Error) -> PcflowStatus {
    match err {
        pcflow::Error::Positivity { .. } => PcflowStatus::PositivityViolation,
        pcflow::Error::PositivityBreakdown { .. } => PcflowStatus::PositivityBreakdown,
        pcflow::Error::Io(_) => PcflowStatus::IoError,
        _ => PcflowStatus::InvalidArgument,
    }
}

fn guarded<F: FnOnce() -> PcflowStatus>(f: F) -> PcflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            PcflowStatus::InternalPanic
        }
    }
}

/// ABI version of this header/library pair.
#[no_mangle]
pub extern "C" fn pcflow_abi_version() -> u32 {
    1
}

/// Message describing the most recent failure on this thread. The pointer
/// is valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pcflow_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn parse_kind(data_kind: *const c_char) -> Result<DataKind, ()> {
    if data_kind.is_null() {
        set_error("data_kind is null");
        return Err(());
    }
    let s = match CStr::from_ptr(data_kind).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("data_kind is not valid UTF-8");
            return Err(());
        }
    };
    DataKind::parse(s).map_err(|e| set_error(&e.to_string()))
}

/// Create a simulation at t = 0 from validated initial data.
///
/// `data_kind` is one of "flat", "kahler", "rank_one", "hs".
///
/// # Safety
/// `out` must be a valid pointer; `data_kind` must be a NUL-terminated
/// string or null.
#[no_mangle]
pub unsafe extern "C" fn pcflow_sim_new(
    dim: u32,
    grid: u32,
    data_kind: *const c_char,
    epsilon: f64,
    seed: u64,
    out: *mut *mut PcflowSim,
) -> PcflowStatus {
    if out.is_null() {
        set_error("out is null");
        return PcflowStatus::NullPointer;
    }
    let kind = match parse_kind(data_kind) {
        Ok(k) => k,
        Err(()) => return PcflowStatus::InvalidArgument,
    };
    guarded(|| {
        let build = || -> pcflow::Result<FlowState> {
            let chart = TorusChart::new(dim as usize, grid as usize)?;
            let mut spec = DataSpec::defaults(kind, dim as usize);
            spec.epsilon = epsilon;
            spec.seed = seed;
            match kind {
                DataKind::Flat => FlowState::new(initial::make_flat(&chart)?, None),
                DataKind::Kahler => {
                    FlowState::new(initial::make_kahler_perturbation(&chart, &spec)?, None)
                }
                DataKind::PluriclosedRankOne => {
                    FlowState::new(initial::make_pluriclosed_rank_one(&chart, &spec)?, None)
                }
                DataKind::HermitianSymplectic => {
                    FlowState::from_hs(initial::make_hermitian_symplectic(&chart, &spec)?)
                }
            }
        };
        match build() {
            Ok(state) => {
                let sim = Box::new(PcflowSim {
                    state,
                    records: Vec::new(),
                    outcome: RunOutcome::Completed,
                });
                *out = Box::into_raw(sim);
                PcflowStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Load a simulation state from a snapshot file written by
/// `pcflow_sim_write_snapshot` (or the CLI).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcflow_sim_load_snapshot(
    path: *const c_char,
    out: *mut *mut PcflowSim,
) -> PcflowStatus {
    if path.is_null() || out.is_null() {
        set_error("null pointer argument");
        return PcflowStatus::NullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => PathBuf::from(s),
        Err(_) => {
            set_error("path is not valid UTF-8");
            return PcflowStatus::InvalidArgument;
        }
    };
    guarded(|| match pcflow::snapshot::read_snapshot(&path) {
        Ok(state) => {
            let sim = Box::new(PcflowSim {
                state,
                records: Vec::new(),
                outcome: RunOutcome::Completed,
            });
            *out = Box::into_raw(sim);
            PcflowStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    })
}

/// Integrate to the absolute time `horizon`, appending per-step diagnostic
/// records. `deriv_stride` controls how often the derivative-norm monitors
/// are refreshed (1 = every step).
///
/// # Safety
/// `sim` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn pcflow_sim_run(
    sim: *mut PcflowSim,
    horizon: f64,
    safety: f64,
    deriv_stride: u32,
) -> PcflowStatus {
    let Some(sim) = sim.as_mut() else {
        set_error("sim is null");
        return PcflowStatus::NullPointer;
    };
    guarded(|| {
        let controls = FlowControls {
            safety,
            deriv_stride: deriv_stride.max(1) as usize,
            ..Default::default()
        };
        match flow::run(sim.state.clone(), horizon, &controls) {
            Ok(res) => {
                sim.state = res.final_state;
                sim.outcome = res.outcome.clone();
                sim.records.extend(res.records);
                match res.outcome {
                    RunOutcome::PositivityBreakdown { t, dt } => {
                        set_error(&format!("positivity breakdown at t = {t:e} (dt = {dt:e})"));
                        PcflowStatus::PositivityBreakdown
                    }
                    _ => PcflowStatus::Ok,
                }
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Current flow time of the handle.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcflow_sim_time(sim: *const PcflowSim) -> f64 {
    sim.as_ref().map(|s| s.state.t).unwrap_or(f64::NAN)
}

/// Number of accumulated diagnostic records.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcflow_sim_record_count(sim: *const PcflowSim) -> usize {
    sim.as_ref().map(|s| s.records.len()).unwrap_or(0)
}

/// Copy record `index` into `row[12]` with the CSV column order:
/// t, dt, max_curv, max_torsion_sq, max_phi_sq, d1, d2, scaled1, scaled2,
/// pluriclosed_residual, hs_residual, min_eig.
///
/// # Safety
/// `sim` must be a live handle and `row` must point to 12 doubles.
#[no_mangle]
pub unsafe extern "C" fn pcflow_sim_record(
    sim: *const PcflowSim,
    index: usize,
    row: *mut f64,
) -> PcflowStatus {
    let Some(sim) = sim.as_ref() else {
        set_error("sim is null");
        return PcflowStatus::NullPointer;
    };
    if row.is_null() {
        set_error("row is null");
        return PcflowStatus::NullPointer;
    }
    let Some(r) = sim.records.get(index) else {
        set_error("record index out of range");
        return PcflowStatus::InvalidArgument;
    };
    let vals = [
        r.t,
        r.dt,
        r.max_curv,
        r.max_torsion_sq,
        r.max_phi_sq,
        r.d1,
        r.d2,
        r.scaled1,
        r.scaled2,
        r.pluriclosed_residual,
        r.hs_residual,
        r.min_eig,
    ];
    std::ptr::copy_nonoverlapping(vals.as_ptr(), row, 12);
    PcflowStatus::Ok
}

/// Write the handle's current state to a snapshot file (bit-exact format).
///
/// # Safety
/// `sim` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pcflow_sim_write_snapshot(
    sim: *const PcflowSim,
    path: *const c_char,
) -> PcflowStatus {
    let Some(sim) = sim.as_ref() else {
        set_error("sim is null");
        return PcflowStatus::NullPointer;
    };
    if path.is_null() {
        set_error("path is null");
        return PcflowStatus::NullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => PathBuf::from(s),
        Err(_) => {
            set_error("path is not valid UTF-8");
            return PcflowStatus::InvalidArgument;
        }
    };
    guarded(|| match pcflow::snapshot::write_snapshot(&path, &sim.state) {
        Ok(()) => PcflowStatus::Ok,
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    })
}

/// Run the static identity suite on freshly constructed data and report the
/// worst relative residual. Returns InvalidArgument when any case fails its
/// tolerance.
///
/// # Safety
/// `data_kind` must be NUL-terminated or null; `out_worst_rel` may be null.
#[no_mangle]
pub unsafe extern "C" fn pcflow_verify_static(
    dim: u32,
    grid: u32,
    data_kind: *const c_char,
    epsilon: f64,
    out_worst_rel: *mut f64,
) -> PcflowStatus {
    let kind = match parse_kind(data_kind) {
        Ok(k) => k,
        Err(()) => return PcflowStatus::InvalidArgument,
    };
    guarded(|| {
        let mut spec = DataSpec::defaults(kind, dim as usize);
        spec.epsilon = epsilon;
        let cfg = SuiteConfig::new(dim as usize, grid as usize, spec);
        let cases = [
            CaseId::Pluriclosed,
            CaseId::BianchiFirstA,
            CaseId::BianchiFirstB,
            CaseId::BianchiSecondA,
            CaseId::BianchiSecondB,
            CaseId::CommutatorPq,
            CaseId::LaplacianDiff,
        ];
        match identity::run_suite(&cases, &cfg) {
            Ok(outcomes) => {
                let mut worst: f64 = 0.0;
                let mut all_pass = true;
                for o in &outcomes {
                    match &o.report {
                        Some(r) => {
                            worst = worst.max(r.rel_residual);
                            all_pass &= r.pass;
                        }
                        None => {
                            set_error(o.error.as_deref().unwrap_or("case error"));
                            return PcflowStatus::InvalidArgument;
                        }
                    }
                }
                if !out_worst_rel.is_null() {
                    *out_worst_rel = worst;
                }
                if all_pass {
                    PcflowStatus::Ok
                } else {
                    set_error("one or more identity cases exceeded tolerance");
                    PcflowStatus::InvalidArgument
                }
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a handle. Passing null is a no-op.
///
/// # Safety
/// `sim` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pcflow_sim_free(sim: *mut PcflowSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
