//! C interface to the spinhall simulator.
//!
//! Handles are opaque and owned by the caller once returned; free them with the matching `*_free`.
//! Every fallible call returns a [`ShStatus`]; on failure [`sh_last_error_message`] describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spinhall::config::{parse_config, ScenarioConfig};
use spinhall::dynamics::{integrate_beam_at, spin_hall_pair, Trajectory};
use spinhall::initial::BeamSpec;
use spinhall::ode::sample_times;
use spinhall::runner::{trajectory_row, TRAJECTORY_COLUMNS};
use spinhall::{MediumModel, SimError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Integration = 3,
    Verification = 4,
    Io = 5,
    InvalidArgument = 6,
    Panic = 7,
}

/// Parsed scenario together with its medium.
pub struct ShScenario {
    config: ScenarioConfig,
    medium: MediumModel,
    spec: BeamSpec,
}

/// Sampled beam trajectory.
pub struct ShTrajectory {
    rows: Vec<Vec<f64>>,
    energy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &SimError) -> ShStatus {
    match e {
        SimError::Config { .. } => ShStatus::Config,
        SimError::Input(_) => ShStatus::InvalidArgument,
        SimError::Integration { .. } | SimError::Propagation { .. } | SimError::Degenerate(_) => ShStatus::Integration,
        SimError::Verification(_) => ShStatus::Verification,
        SimError::Io { .. } => ShStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), (ShStatus, String)>>(f: F) -> ShStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ShStatus::Panic
        }
    }
}

fn sim(e: SimError) -> (ShStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ShStatus, String) {
    (ShStatus::NullPointer, format!("{what} is null"))
}

fn build(config: ScenarioConfig) -> Result<ShScenario, SimError> {
    let medium = config.medium_model()?;
    let spec = config.beam_spec(&medium)?;
    Ok(ShScenario { config, medium, spec })
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn sh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON scenario document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_scenario_from_json(json: *const c_char, out: *mut *mut ShScenario) -> ShStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| (ShStatus::InvalidArgument, "json is not UTF-8".to_string()))?;
        let sc = parse_config(text).and_then(build).map_err(sim)?;
        *out = Box::into_raw(Box::new(sc));
        Ok(())
    })
}

/// The default scenario.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_scenario_default(out: *mut *mut ShScenario) -> ShStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sc = build(ScenarioConfig::default()).map_err(sim)?;
        *out = Box::into_raw(Box::new(sc));
        Ok(())
    })
}

/// # Safety
/// `sc` must come from a scenario constructor and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sh_scenario_free(sc: *mut ShScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Replaces ω and the helicity s of the beam.
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn sh_scenario_set_beam(sc: *mut ShScenario, omega: f64, s: f64) -> ShStatus {
    guard(|| {
        let sc = sc.as_mut().ok_or_else(|| null("scenario"))?;
        let spec = BeamSpec { omega, s, ..sc.spec.clone() };
        spec.validate().map_err(sim)?;
        sc.spec = spec;
        Ok(())
    })
}

fn times(sc: &ShScenario) -> Vec<f64> {
    sample_times(sc.config.integration.t_end, sc.config.integration.sample_stride)
}

/// Integrates the beam and samples it every `integration.sample_stride`.
///
/// # Safety
/// `sc` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_integrate_beam(sc: *const ShScenario, out: *mut *mut ShTrajectory) -> ShStatus {
    guard(|| {
        let sc = sc.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let stepper = sc.config.stepper(None).map_err(sim)?;
        let traj: Trajectory = integrate_beam_at(&sc.spec, &sc.medium, &times(sc), stepper).map_err(sim)?;
        let rows = traj.samples.iter().map(trajectory_row).collect();
        *out = Box::into_raw(Box::new(ShTrajectory { rows, energy: traj.energy }));
        Ok(())
    })
}

/// # Safety
/// `tr` must come from [`sh_integrate_beam`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sh_trajectory_free(tr: *mut ShTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Number of samples, 0 for NULL.
///
/// # Safety
/// `tr` must be NULL or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn sh_trajectory_len(tr: *const ShTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.rows.len())
}

/// Total energy of the beam, NaN for NULL.
///
/// # Safety
/// `tr` must be NULL or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn sh_trajectory_energy(tr: *const ShTrajectory) -> f64 {
    tr.as_ref().map_or(f64::NAN, |t| t.energy)
}

/// Number of values per sample (the trajectory CSV columns).
#[no_mangle]
pub extern "C" fn sh_trajectory_columns() -> usize {
    TRAJECTORY_COLUMNS.len()
}

/// Name of column `i` as a static NUL-terminated string, or NULL when out of range.
#[no_mangle]
pub extern "C" fn sh_trajectory_column_name(i: usize) -> *const c_char {
    const NAMES: [&str; 25] = [
        "t\0", "X1\0", "X2\0", "X3\0", "P1\0", "P2\0", "P3\0", "J1\0", "J2\0", "J3\0", "Q11\0", "Q12\0", "Q13\0", "Q22\0",
        "Q23\0", "Q33\0", "gx1\0", "gx2\0", "gx3\0", "gp1\0", "gp2\0", "gp3\0", "s\0", "H\0", "minEigImM\0",
    ];
    NAMES.get(i).map_or(ptr::null(), |s| s.as_ptr().cast())
}

/// Copies sample `i` into `out`, which must hold [`sh_trajectory_columns`] doubles.
///
/// # Safety
/// `tr` must be a live trajectory handle and `out` must point to enough writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sh_trajectory_row(tr: *const ShTrajectory, i: usize, out: *mut f64) -> ShStatus {
    guard(|| {
        let tr = tr.as_ref().ok_or_else(|| null("trajectory"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let row = tr.rows.get(i).ok_or_else(|| (ShStatus::InvalidArgument, format!("sample {i} out of range ({} samples)", tr.rows.len())))?;
        ptr::copy_nonoverlapping(row.as_ptr(), out, row.len());
        Ok(())
    })
}

/// Runs both helicities (the scenario's s is replaced by ±1) and reports X₊(T) − X₋(T), the largest
/// distance of the s = +1 centroid from the ray, and the mid-slab drift cosine.
///
/// # Safety
/// `sc` must be a live scenario handle; `sep` must point to 3 writable doubles; the other outputs may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sh_spin_hall_pair(
    sc: *const ShScenario,
    sep: *mut f64,
    geo_dev_sup: *mut f64,
    mid_cos_angle: *mut f64,
) -> ShStatus {
    guard(|| {
        let sc = sc.as_ref().ok_or_else(|| null("scenario"))?;
        if sep.is_null() {
            return Err(null("sep"));
        }
        let stepper = sc.config.stepper(None).map_err(sim)?;
        let spec = BeamSpec { s: 1.0, ..sc.spec.clone() };
        let pair = spin_hall_pair(&spec, &sc.medium, &times(sc), stepper).map_err(sim)?;
        let last = pair.sep.last().copied().unwrap_or_default();
        ptr::copy_nonoverlapping(last.as_ptr(), sep, 3);
        if !geo_dev_sup.is_null() {
            *geo_dev_sup = pair.geo_dev.iter().cloned().fold(0.0, f64::max);
        }
        if !mid_cos_angle.is_null() {
            *mid_cos_angle = pair.mid_cos_angle;
        }
        Ok(())
    })
}
