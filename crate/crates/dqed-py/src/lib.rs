//! Python bindings: the batch commands plus a few closed-form helpers.
//!
//! Errors surface as `DqedError` subclasses whose `exit_code` matches the
//! command-line tool.

use std::path::PathBuf;

use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::PyRuntimeError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dqed::cli::{exit_code, run_file, Command, RunConfig};
use dqed::geometry::meshgen::cone_ball;
use dqed::material::DrudeLorentz;
use dqed::modes::{Family, ModeOptions, ModeSet};
use dqed::response::small_size_closed_forms;

create_exception!(_dqed, DqedError, PyRuntimeError);
create_exception!(_dqed, ConfigError, DqedError);
create_exception!(_dqed, NumericError, DqedError);
create_exception!(_dqed, ValidationError, DqedError);

fn to_py(e: dqed::Error) -> PyErr {
    let msg = e.to_string();
    match exit_code(&e) {
        1 => ConfigError::new_err(msg),
        3 => ValidationError::new_err(msg),
        _ => NumericError::new_err(msg),
    }
}

fn material(omega_p: f64, omega_0: f64, gamma: f64) -> PyResult<DrudeLorentz> {
    DrudeLorentz::new(omega_p, omega_0, gamma).map_err(to_py)
}

/// Runs one batch command; returns the written files and the progress log.
#[pyfunction]
#[pyo3(signature = (command, config, out, cache=None, verbose=false))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    config: PathBuf,
    out: PathBuf,
    cache: Option<PathBuf>,
    verbose: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cmd: Command = command.parse().map_err(to_py)?;
    let report = py.allow_threads(|| run_file(cmd, &config, &out, cache.as_deref(), verbose)).map_err(to_py)?;
    let d = PyDict::new_bound(py);
    d.set_item("files", report.files)?;
    d.set_item("log", report.log)?;
    d.set_item("mode_cache_hit", report.mode_cache_hit)?;
    let checks: Vec<(String, f64, f64, f64, bool)> =
        report.checks.into_iter().map(|c| (c.name, c.measured, c.expected, c.tolerance, c.pass)).collect();
    d.set_item("checks", checks)?;
    Ok(d)
}

/// Parses and validates a run configuration; returns it with defaults filled in.
#[pyfunction]
fn normalize_config(text: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(text).map_err(to_py)?;
    serde_json::to_string_pretty(&cfg).map_err(|e| ConfigError::new_err(e.to_string()))
}

/// `χ̃(s)` of the Drude–Lorentz model.
#[pyfunction]
fn susceptibility(omega_p: f64, omega_0: f64, gamma: f64, s: C64) -> PyResult<C64> {
    material(omega_p, omega_0, gamma)?.chi(s).map_err(to_py)
}

/// Single-mode transfer function of an unbounded medium.
#[pyfunction]
fn infinite_medium_transfer(omega_p: f64, omega_0: f64, gamma: f64, omega_mu: f64, s: C64) -> PyResult<C64> {
    dqed::analytic::infinite_medium_transfer(&material(omega_p, omega_0, gamma)?, omega_mu, s).map_err(to_py)
}

/// Longitudinal eigenvalue of multipole order `l` of a sphere and its degeneracy.
#[pyfunction]
fn sphere_kappa_longitudinal(l: u32) -> PyResult<(f64, usize)> {
    dqed::analytic::sphere_kappa_longitudinal(l).map_err(to_py)
}

/// Eigenvalues of both mode families of a meshed ball.
#[pyfunction]
#[pyo3(signature = (subdivisions, radius, longitudinal=3, transverse=3))]
fn ball_spectrum<'py>(
    py: Python<'py>,
    subdivisions: usize,
    radius: f64,
    longitudinal: usize,
    transverse: usize,
) -> PyResult<Bound<'py, PyDict>> {
    if subdivisions == 0 || !(radius > 0.0) {
        return Err(ConfigError::new_err("subdivisions and radius must be positive"));
    }
    let opts = ModeOptions { longitudinal, transverse, ..Default::default() };
    let modes = py.allow_threads(|| ModeSet::compute(cone_ball(subdivisions, radius), &opts)).map_err(to_py)?;
    let d = PyDict::new_bound(py);
    d.set_item("kappa_parallel", modes.longitudinal.kappa.clone())?;
    d.set_item("kappa_perpendicular", modes.transverse.kappa.clone())?;
    d.set_item("tets", modes.mesh.len())?;
    d.set_item("radius", modes.radius())?;
    d.set_item("mesh_hash", modes.mesh_hash())?;
    Ok(d)
}

/// Closed-form impulse response of one decoupled mode of a small body.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn small_size_impulse(
    omega_p: f64,
    omega_0: f64,
    gamma: f64,
    kappa: f64,
    family: &str,
    beta: f64,
    t: Vec<f64>,
) -> PyResult<Vec<f64>> {
    let fam = match family {
        "par" => Family::Parallel,
        "perp" => Family::Perpendicular,
        _ => return Err(ConfigError::new_err(format!("family must be 'par' or 'perp', got {family:?}"))),
    };
    let r = small_size_closed_forms(&material(omega_p, omega_0, gamma)?, kappa, fam, beta).map_err(to_py)?;
    Ok(t.iter().map(|&x| r.impulse(x)).collect())
}

#[pymodule]
pub fn _dqed(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("DqedError", py.get_type_bound::<DqedError>())?;
    m.add("ConfigError", py.get_type_bound::<ConfigError>())?;
    m.add("NumericError", py.get_type_bound::<NumericError>())?;
    m.add("ValidationError", py.get_type_bound::<ValidationError>())?;
    m.add("SCHEMA_VERSION", dqed::cli::config::SCHEMA_VERSION)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_config, m)?)?;
    m.add_function(wrap_pyfunction!(susceptibility, m)?)?;
    m.add_function(wrap_pyfunction!(infinite_medium_transfer, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_kappa_longitudinal, m)?)?;
    m.add_function(wrap_pyfunction!(ball_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(small_size_impulse, m)?)?;
    Ok(())
}
