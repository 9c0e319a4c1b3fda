//! Python bindings: `import sbl_mimo`.
//!
//! Matrices cross the boundary as lists of rows of Python `complex`,
//! vectors as flat lists. Coefficient vectors use the column-major `vec`
//! convention of the core crate.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sbl_core::channel::{self, ChannelScenario};
use sbl_core::config::parse_config;
use sbl_core::estimators::{self, ConvergencePolicy, ESblHyper, EstimateReport, SblHyper};
use sbl_core::experiments::{self, format_csv};
use sbl_core::numerics::{gram_structure, ComplexMatrix, DictionaryKron};
use sbl_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Conditioning { .. } | Error::NonFinite(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<ComplexMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows must all have the same length"));
    }
    Ok(ComplexMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect()
}

/// The dictionary `A = Pᵀ ⊗ F`, applied without forming it.
#[pyclass(name = "Dictionary", frozen)]
struct PyDictionary(DictionaryKron);

#[pymethods]
impl PyDictionary {
    /// `pilot` is `K×N`, `transform` is `M×Q`, both as lists of rows.
    #[new]
    fn new(pilot: Vec<Vec<Complex64>>, transform: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let d = DictionaryKron::new(matrix_from_rows(pilot)?, matrix_from_rows(transform)?).map_err(to_py)?;
        Ok(Self(d))
    }

    /// DFT pilot and DFT transform for the given sizes.
    #[staticmethod]
    fn dft(num_antennas: usize, pilot_length: usize, num_users: usize) -> PyResult<Self> {
        let p = channel::dft_pilot(num_users, pilot_length).map_err(to_py)?;
        let d = DictionaryKron::new(p, channel::dft_transform(num_antennas)).map_err(to_py)?;
        Ok(Self(d))
    }

    fn apply(&self, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.apply(&x).map_err(to_py)
    }

    fn apply_adjoint(&self, y: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.apply_adjoint(&y).map_err(to_py)
    }

    fn dense(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(&self.0.to_dense())
    }

    #[getter]
    fn num_coefficients(&self) -> usize {
        self.0.num_coefficients()
    }

    #[getter]
    fn num_observations(&self) -> usize {
        self.0.num_observations()
    }

    #[getter]
    fn structure(&self) -> &'static str {
        gram_structure(&self.0).name()
    }
}

#[pyclass(name = "EstimateResult", frozen, get_all)]
struct PyEstimateResult {
    u_hat: Vec<Complex64>,
    iterations: usize,
    converged: bool,
    objective_trace: Vec<f64>,
    weights: Vec<f64>,
    scales: Option<Vec<f64>>,
    wall_time: f64,
}

impl From<EstimateReport> for PyEstimateResult {
    fn from(r: EstimateReport) -> Self {
        Self {
            u_hat: r.u_hat,
            iterations: r.iterations,
            converged: r.converged,
            objective_trace: r.objective_trace,
            weights: r.weights,
            scales: r.scales,
            wall_time: r.wall_time,
        }
    }
}

#[pymethods]
impl PyEstimateResult {
    fn __repr__(&self) -> String {
        format!("EstimateResult(iterations={}, converged={})", self.iterations, self.converged)
    }
}

fn policy(tol: f64, max_iter: usize, track_objective: bool) -> ConvergencePolicy {
    ConvergencePolicy { tol, max_iter, track_objective }
}

#[pyfunction]
#[pyo3(signature = (dictionary, z, sigma2, *, alpha=0.0, beta=0.0, tol=1e-6, max_iter=500, track_objective=false))]
#[allow(clippy::too_many_arguments)]
fn run_sbl(
    py: Python<'_>,
    dictionary: &PyDictionary,
    z: Vec<Complex64>,
    sigma2: f64,
    alpha: f64,
    beta: f64,
    tol: f64,
    max_iter: usize,
    track_objective: bool,
) -> PyResult<PyEstimateResult> {
    let hyper = SblHyper { alpha, beta };
    let p = policy(tol, max_iter, track_objective);
    py.detach(|| estimators::run_sbl(&dictionary.0, &z, sigma2, &hyper, &p))
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (dictionary, z, sigma2, *, nu=1.0, theta=0.01, phi=0.01, tol=1e-6, max_iter=500, track_objective=false))]
#[allow(clippy::too_many_arguments)]
fn run_esbl(
    py: Python<'_>,
    dictionary: &PyDictionary,
    z: Vec<Complex64>,
    sigma2: f64,
    nu: f64,
    theta: f64,
    phi: f64,
    tol: f64,
    max_iter: usize,
    track_objective: bool,
) -> PyResult<PyEstimateResult> {
    let hyper = ESblHyper { nu, theta, phi };
    let p = policy(tol, max_iter, track_objective);
    py.detach(|| estimators::run_esbl(&dictionary.0, &z, sigma2, &hyper, &p))
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (dictionary, z, sigma2, *, nu=1.0, theta=0.01, phi=0.01, tol=1e-6, max_iter=500, track_objective=false))]
#[allow(clippy::too_many_arguments)]
fn run_mesbl(
    py: Python<'_>,
    dictionary: &PyDictionary,
    z: Vec<Complex64>,
    sigma2: f64,
    nu: f64,
    theta: f64,
    phi: f64,
    tol: f64,
    max_iter: usize,
    track_objective: bool,
) -> PyResult<PyEstimateResult> {
    let hyper = ESblHyper { nu, theta, phi };
    let p = policy(tol, max_iter, track_objective);
    py.detach(|| estimators::run_mesbl(&dictionary.0, &z, sigma2, &hyper, &p))
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn run_least_squares(dictionary: &PyDictionary, z: Vec<Complex64>, sigma2: f64) -> PyResult<PyEstimateResult> {
    estimators::run_least_squares(&dictionary.0, &z, sigma2)
        .map(Into::into)
        .map_err(to_py)
}

/// Draws trial `trial` of a scenario: `(H as rows, z, sigma2)`.
#[pyfunction]
#[pyo3(signature = (num_antennas, pilot_length, num_users, snr_db, *, scatterers=3, seed=0, trial=0))]
fn generate_trial(
    num_antennas: usize,
    pilot_length: usize,
    num_users: usize,
    snr_db: f64,
    scatterers: usize,
    seed: u64,
    trial: usize,
) -> PyResult<(Vec<Vec<Complex64>>, Vec<Complex64>, f64)> {
    let mut s = ChannelScenario::new(num_antennas, pilot_length, num_users, snr_db);
    s.num_scatterers = scatterers;
    s.seed = seed;
    s.validate().map_err(to_py)?;
    let (h, obs) = experiments::trial_inputs(&s, trial).map_err(to_py)?;
    Ok((matrix_to_rows(&h), obs.z, obs.noise_variance))
}

/// Runs the sweep described by a TOML config and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (config, *, seed=None, trials=None))]
fn run_sweep(py: Python<'_>, config: &str, seed: Option<u64>, trials: Option<usize>) -> PyResult<String> {
    let cfg = parse_config(config).map_err(to_py)?;
    let mut spec = cfg.sweep_spec().map_err(to_py)?;
    if let Some(s) = seed {
        spec.base_scenario.seed = s;
    }
    if let Some(t) = trials {
        spec.num_trials = t;
    }
    let result = py.detach(|| experiments::run_sweep(&spec)).map_err(to_py)?;
    Ok(format_csv(&result))
}

/// Runs the built-in invariant suite; returns `(passed, [(name, passed, detail)])`.
#[pyfunction]
fn selftest(py: Python<'_>) -> (bool, Vec<(String, bool, String)>) {
    let report = py.detach(sbl_core::selftest::run_selftest);
    let checks = report
        .checks
        .iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail.clone()))
        .collect();
    (report.passed(), checks)
}

#[pymodule]
pub fn sbl_mimo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDictionary>()?;
    m.add_class::<PyEstimateResult>()?;
    m.add_function(wrap_pyfunction!(run_sbl, m)?)?;
    m.add_function(wrap_pyfunction!(run_esbl, m)?)?;
    m.add_function(wrap_pyfunction!(run_mesbl, m)?)?;
    m.add_function(wrap_pyfunction!(run_least_squares, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
