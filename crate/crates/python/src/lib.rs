//! Python bindings. Runs release the GIL; errors map to `ValueError`
//! (configuration), `OSError` (files) and `RuntimeError` (numerics).

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sim::ccm;
use sim::config::{self, ConfigError, RunConfig};
use sim::driver::{self, DriverError, RunReport};
use sim::verification::{self, VerificationError, MESHUPDATE_VELOCITY};

fn driver_err(e: DriverError) -> PyErr {
    match e {
        DriverError::Io(_) => PyOSError::new_err(e.to_string()),
        DriverError::Numerical { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn config_err(e: ConfigError) -> PyErr {
    match e {
        ConfigError::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn verification_err(e: VerificationError) -> PyErr {
    match e {
        VerificationError::Invalid(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn load(path: &PathBuf, overrides: Option<BTreeMap<String, String>>) -> PyResult<RunConfig> {
    let mut raw = config::load_raw(path).map_err(config_err)?;
    for (k, v) in overrides.unwrap_or_default() {
        raw.set(&k, v).map_err(config_err)?;
    }
    RunConfig::from_raw(&raw).map_err(config_err)
}

/// Per-step history and summary of one simulation.
#[pyclass(module = "ccmsim", frozen, get_all)]
pub struct RunResult {
    time: Vec<f64>,
    velocity: Vec<f64>,
    displacement: Vec<f64>,
    flux_avg: Vec<f64>,
    slip_count: Vec<usize>,
    u_eq: f64,
    initial_velocity: f64,
    final_displacement: f64,
    mean_velocity_tail: f64,
    runtime: f64,
    sensor_times: Vec<f64>,
    /// `sensor_values[i][k]` is sensor k at `sensor_times[i]`, None in gaps.
    sensor_values: Vec<Vec<Option<f64>>>,
}

impl From<RunReport> for RunResult {
    fn from(r: RunReport) -> Self {
        Self {
            time: r.records.iter().map(|s| s.time).collect(),
            velocity: r.records.iter().map(|s| s.velocity).collect(),
            displacement: r.records.iter().map(|s| s.displacement).collect(),
            flux_avg: r.records.iter().map(|s| s.flux_avg).collect(),
            slip_count: r.records.iter().map(|s| s.slip_count).collect(),
            u_eq: r.u_eq,
            initial_velocity: r.initial_velocity,
            final_displacement: r.final_displacement,
            mean_velocity_tail: r.mean_velocity_tail,
            runtime: r.runtime,
            sensor_times: r.sensors.times,
            sensor_values: r.sensors.values,
        }
    }
}

#[pymethods]
impl RunResult {
    /// First time at which the velocity reaches `fraction * u_eq`.
    fn time_to_fraction(&self, fraction: f64) -> Option<f64> {
        self.time
            .iter()
            .zip(&self.velocity)
            .find(|(_, &u)| u >= fraction * self.u_eq)
            .map(|(&t, _)| t)
    }

    fn __len__(&self) -> usize {
        self.time.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(steps={}, final_displacement={:e}, u_eq={:e})",
            self.time.len(),
            self.final_displacement,
            self.u_eq
        )
    }
}

/// Runs the simulation described by an INI file. `overrides` maps
/// `section.key` to a replacement value; `out` replaces the output directory.
#[pyfunction]
#[pyo3(signature = (config, out=None, overrides=None))]
fn run(py: Python<'_>, config: PathBuf, out: Option<PathBuf>, overrides: Option<BTreeMap<String, String>>) -> PyResult<RunResult> {
    let mut cfg = load(&config, overrides)?;
    if let Some(out) = out {
        cfg.output.directory = out;
    }
    let report = py.detach(|| driver::run(&cfg)).map_err(driver_err)?;
    Ok(report.into())
}

/// Parses and validates a config; returns the resolved settings as text.
#[pyfunction]
#[pyo3(signature = (config, overrides=None))]
fn check_config(config: PathBuf, overrides: Option<BTreeMap<String, String>>) -> PyResult<String> {
    Ok(load(&config, overrides)?.describe())
}

/// Equilibrium melting velocity (m/s) for the source in a config.
#[pyfunction]
fn equilibrium_velocity(config: PathBuf) -> PyResult<f64> {
    let cfg = load(&config, None)?;
    ccm::u_equilibrium_with(&cfg.closure(), cfg.numerics.secant_tol).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Transient velocity (m/s) for a given solid-side flux q_s (W/m²), and
/// whether the source stalled.
#[pyfunction]
fn transient_velocity(config: PathBuf, q_s: f64) -> PyResult<(f64, bool)> {
    let cfg = load(&config, None)?;
    let r = ccm::u_transient_with(&cfg.closure(), q_s, cfg.numerics.secant_tol)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((r.velocity, r.stalled))
}

/// Boundary-flux verification on the cooling unit square.
/// Returns (times, flux, reference, relative_error).
#[pyfunction]
fn verify_cbf(py: Python<'_>, h: f64, dt: f64, steps: usize) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let c = py.detach(|| verification::run_cbf_case(h, dt, steps)).map_err(verification_err)?;
    Ok((c.times, c.flux, c.reference, c.relative_error))
}

/// Mesh-update verification; returns (per-step L2 errors, slips).
#[pyfunction]
#[pyo3(signature = (h, velocity=MESHUPDATE_VELOCITY))]
fn verify_meshupdate(py: Python<'_>, h: f64, velocity: f64) -> PyResult<(Vec<f64>, usize)> {
    let c = py.detach(|| verification::run_meshupdate_case(h, velocity)).map_err(verification_err)?;
    Ok((c.errors, c.slips))
}

/// Reference boundary flux of the cooling slab at time t.
#[pyfunction]
fn series_flux(t: f64) -> Option<f64> {
    sim::cbf::series_flux_reference(t)
}

/// Reference temperature of the cooling slab at (x, t).
#[pyfunction]
fn series_temperature(x: f64, t: f64) -> Option<f64> {
    verification::series_temperature(x, t)
}

#[pymodule]
pub fn ccmsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(transient_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(verify_cbf, m)?)?;
    m.add_function(wrap_pyfunction!(verify_meshupdate, m)?)?;
    m.add_function(wrap_pyfunction!(series_flux, m)?)?;
    m.add_function(wrap_pyfunction!(series_temperature, m)?)?;
    Ok(())
}
