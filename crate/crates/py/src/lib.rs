//! Python bindings: parameters, grids, symbols, per-mode right-hand sides,
//! energies, rate fits and whole-run simulation.

use std::path::Path;

use couette::cli::config::from_json;
use couette::cli::io::parse_trajectory;
use couette::cli::run::{self as runner, RunError};
use couette::cli::{parse_config as parse_run_config, Threads};
use couette::dynamics::{rhs_full as full_rhs, rhs_reduced as reduced_rhs};
use couette::energy;
use couette::grid::GridSpec;
use couette::rate_fit::{self, FitResult};
use couette::symbols::{self, AuditGrid, DomainError};
use couette::{integrator, zero_mode, FlowParams, Mode, ModeState, ReducedModeState};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err(e: RunError) -> PyErr {
    match e {
        RunError::Integration(_) | RunError::Pool(_) => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn domain(r: Result<f64, DomainError>) -> PyResult<f64> {
    r.map_err(value_err)
}

#[pyclass(name = "FlowParams", module = "couette", frozen)]
struct PyFlowParams {
    inner: FlowParams,
}

#[pymethods]
impl PyFlowParams {
    /// Raises `ValueError` unless `gamma > 1`, `0 < nu < 1`, `0 < M <= 1/nu`
    /// and `s >= 0`; pass `check=False` to skip the hypotheses.
    #[new]
    #[pyo3(signature = (gamma, nu, M, s = 1.5, check = true))]
    #[allow(non_snake_case)]
    fn new(gamma: f64, nu: f64, M: f64, s: f64, check: bool) -> PyResult<Self> {
        let inner = if check {
            FlowParams::new(gamma, nu, M, s).map_err(value_err)?
        } else {
            FlowParams::new_unchecked(gamma, nu, M, s)
        };
        Ok(Self { inner })
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.inner.nu
    }

    #[getter(M)]
    fn mach(&self) -> f64 {
        self.inner.mach
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "FlowParams(gamma={}, nu={}, M={}, s={})",
            p.gamma, p.nu, p.mach, p.s
        )
    }
}

#[pyclass(name = "GridSpec", module = "couette", frozen)]
struct PyGridSpec {
    inner: GridSpec,
}

#[pymethods]
impl PyGridSpec {
    #[new]
    #[pyo3(signature = (K, eta_max, delta_eta))]
    #[allow(non_snake_case)]
    fn new(K: i64, eta_max: f64, delta_eta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: GridSpec::new(K, eta_max, delta_eta).map_err(value_err)?,
        })
    }

    #[getter(K)]
    fn k_max(&self) -> i64 {
        self.inner.k_max()
    }

    #[getter]
    fn eta_max(&self) -> f64 {
        self.inner.eta_max()
    }

    #[getter]
    fn delta_eta(&self) -> f64 {
        self.inner.delta_eta()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn eta(&self, j: i64) -> f64 {
        self.inner.eta(j)
    }

    /// `(k, eta)` of every lattice point in storage order.
    fn points(&self) -> Vec<(i64, f64)> {
        self.inner
            .points()
            .map(|(k, j)| (k, self.inner.eta(j)))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "GridSpec(K={}, eta_max={}, delta_eta={})",
            self.inner.k_max(),
            self.inner.eta_max(),
            self.inner.delta_eta()
        )
    }
}

#[pyfunction]
fn p_symbol(t: f64, k: i64, eta: f64) -> PyResult<f64> {
    domain(symbols::p_symbol(t, k, eta))
}

#[pyfunction]
fn dt_p_symbol(t: f64, k: i64, eta: f64) -> PyResult<f64> {
    domain(symbols::dt_p_symbol(t, k, eta))
}

#[pyfunction]
fn ghost_multiplier(t: f64, k: i64, eta: f64, nu: f64) -> PyResult<f64> {
    domain(symbols::ghost_multiplier(t, k, eta, nu))
}

#[pyfunction]
fn ghost_log_derivative(t: f64, k: i64, eta: f64, nu: f64) -> PyResult<f64> {
    domain(symbols::ghost_log_derivative(t, k, eta, nu))
}

#[pyfunction]
fn crucial_property_margin(t: f64, k: i64, eta: f64, nu: f64) -> PyResult<f64> {
    domain(symbols::crucial_property_margin(t, k, eta, nu))
}

#[pyfunction]
fn bracket_inequality_margin(t: f64, k: i64, eta: f64) -> PyResult<f64> {
    domain(symbols::bracket_inequality_margin(t, k, eta))
}

#[pyfunction]
fn gronwall_factor(t: f64, k: i64, eta: f64) -> PyResult<f64> {
    domain(symbols::gronwall_factor(t, k, eta))
}

#[pyfunction]
fn viscous_phase(t0: f64, t1: f64, k: i64, eta: f64, nu: f64) -> PyResult<f64> {
    domain(integrator::viscous_phase(t0, t1, k, eta, nu))
}

/// Derivative of `(R, A, Omega, Theta)` for mode `(k, eta)` at time `t`.
#[pyfunction]
fn rhs_full(
    k: i64,
    eta: f64,
    state: (Complex64, Complex64, Complex64, Complex64),
    t: f64,
    params: PyRef<'_, PyFlowParams>,
) -> PyResult<(Complex64, Complex64, Complex64, Complex64)> {
    let s = ModeState::new(k, eta, state.0, state.1, state.2, state.3).map_err(value_err)?;
    let d = full_rhs(&s, t, &params.inner);
    Ok((d.r, d.a, d.omega, d.theta))
}

/// Derivative of `(Phi, A)`; `forcing = Phi_in + Omega_in`.
#[pyfunction]
#[pyo3(signature = (k, eta, phi, a, t, params, forcing = Complex64::new(0.0, 0.0)))]
fn rhs_reduced(
    k: i64,
    eta: f64,
    phi: Complex64,
    a: Complex64,
    t: f64,
    params: PyRef<'_, PyFlowParams>,
    forcing: Complex64,
) -> PyResult<(Complex64, Complex64)> {
    let s = ReducedModeState::new(k, eta, phi, a).map_err(value_err)?;
    let d = reduced_rhs(&s, t, &params.inner, forcing);
    Ok((d.phi, d.a))
}

#[pyfunction]
#[allow(non_snake_case)]
fn damped_wave_roots(eta: f64, nu: f64, M: f64) -> (Complex64, Complex64) {
    zero_mode::damped_wave_roots(eta, nu, M)
}

#[pyfunction]
#[allow(non_snake_case)]
fn damped_wave_alpha(
    eta: f64,
    nu: f64,
    M: f64,
    alpha0: Complex64,
    dalpha0: Complex64,
    t: f64,
) -> Complex64 {
    zero_mode::damped_wave_alpha(eta, nu, M, alpha0, dalpha0, t)
}

/// Weighted energy `E` of one mode.
#[pyfunction]
fn mode_energy(
    k: i64,
    eta: f64,
    phi: Complex64,
    a: Complex64,
    t: f64,
    params: PyRef<'_, PyFlowParams>,
) -> PyResult<f64> {
    let mode = Mode::new(k, eta).map_err(value_err)?;
    Ok(energy::mode_energy(&mode, phi, a, t, &params.inner))
}

/// `E` divided by the coercive form `|Z1|^2 + |Z2|^2`.
#[pyfunction]
fn coercivity_ratio(
    k: i64,
    eta: f64,
    phi: Complex64,
    a: Complex64,
    t: f64,
    params: PyRef<'_, PyFlowParams>,
) -> PyResult<f64> {
    let s = ReducedModeState::new(k, eta, phi, a).map_err(value_err)?;
    energy::state_coercivity(&s, t, &params.inner).map_err(value_err)
}

fn series(t: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    if t.len() != v.len() {
        return Err(PyValueError::new_err("t and v differ in length"));
    }
    Ok(t.into_iter().zip(v).collect())
}

fn fit_dict<'py>(py: Python<'py>, f: &FitResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("exponent_or_rate", f.exponent_or_rate)?;
    d.set_item("intercept", f.intercept)?;
    d.set_item("rms_residual", f.rms_residual)?;
    d.set_item("window", (f.window[0], f.window[1]))?;
    d.set_item("n_points", f.n_points)?;
    Ok(d)
}

/// Slope of `log v` against `log <t>` over `window`.
#[pyfunction]
fn power_law_slope<'py>(
    py: Python<'py>,
    t: Vec<f64>,
    v: Vec<f64>,
    window: (f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let fit = rate_fit::power_law_slope(&series(t, v)?, [window.0, window.1]).map_err(value_err)?;
    fit_dict(py, &fit)
}

/// Decay rate of `v <t>^(-detrend_power)` over `window`.
#[pyfunction]
#[pyo3(signature = (t, v, window, detrend_power = 0.0))]
fn exp_rate<'py>(
    py: Python<'py>,
    t: Vec<f64>,
    v: Vec<f64>,
    window: (f64, f64),
    detrend_power: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = rate_fit::exp_rate(&series(t, v)?, [window.0, window.1], detrend_power)
        .map_err(value_err)?;
    fit_dict(py, &fit)
}

#[pyfunction]
fn bound_saturation(
    t: Vec<f64>,
    v: Vec<f64>,
    exponent: f64,
    head: (f64, f64),
    tail: (f64, f64),
) -> PyResult<f64> {
    rate_fit::bound_saturation(&series(t, v)?, exponent, [head.0, head.1], [tail.0, tail.1])
        .map_err(value_err)
}

/// Validates a JSON run configuration and returns it with defaults filled in.
#[pyfunction]
fn parse_config(text: &str) -> PyResult<String> {
    Ok(parse_run_config(text).map_err(value_err)?.to_json())
}

/// Runs a JSON configuration. Returns a dict of trajectory columns plus
/// `"manifest"` (a JSON string).
#[pyfunction]
#[pyo3(signature = (config, threads = None))]
fn simulate<'py>(
    py: Python<'py>,
    config: &str,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = parse_run_config(config).map_err(value_err)?;
    if let Some(n) = threads {
        cfg.threads = Threads::Count(n);
    }
    let out = py.detach(|| runner::run(&cfg, None)).map_err(run_err)?;
    let d = PyDict::new(py);
    let records = &out.trajectory.records;
    for (i, name) in couette::diagnostics::DiagnosticsRecord::COLUMNS
        .iter()
        .enumerate()
    {
        let col: Vec<f64> = records.iter().map(|r| r.values()[i]).collect();
        d.set_item(*name, col)?;
    }
    let manifest = serde_json::to_string(&out.manifest).map_err(value_err)?;
    d.set_item("manifest", manifest)?;
    Ok(d)
}

/// `fit-rates` on trajectory CSV text; returns JSON.
#[pyfunction]
fn fit_rates(trajectory_csv: &str, nu: f64) -> PyResult<String> {
    let records = parse_trajectory(trajectory_csv, Path::new("<string>")).map_err(value_err)?;
    serde_json::to_string(&runner::fit_rates(&records, nu)).map_err(value_err)
}

/// Symbol audit over a JSON grid (or the default grid); returns JSON.
#[pyfunction]
#[pyo3(signature = (grid = None))]
fn audit_symbols(grid: Option<&str>) -> PyResult<String> {
    let grid: AuditGrid = match grid {
        Some(text) => from_json(text).map_err(value_err)?,
        None => AuditGrid::default(),
    };
    serde_json::to_string(&symbols::audit_symbols(&grid)).map_err(value_err)
}

#[pymodule]
#[pyo3(name = "couette")]
fn couette_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFlowParams>()?;
    m.add_class::<PyGridSpec>()?;
    m.add_function(wrap_pyfunction!(p_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(dt_p_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(ghost_multiplier, m)?)?;
    m.add_function(wrap_pyfunction!(ghost_log_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(crucial_property_margin, m)?)?;
    m.add_function(wrap_pyfunction!(bracket_inequality_margin, m)?)?;
    m.add_function(wrap_pyfunction!(gronwall_factor, m)?)?;
    m.add_function(wrap_pyfunction!(viscous_phase, m)?)?;
    m.add_function(wrap_pyfunction!(rhs_full, m)?)?;
    m.add_function(wrap_pyfunction!(rhs_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(damped_wave_roots, m)?)?;
    m.add_function(wrap_pyfunction!(damped_wave_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(mode_energy, m)?)?;
    m.add_function(wrap_pyfunction!(coercivity_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(power_law_slope, m)?)?;
    m.add_function(wrap_pyfunction!(exp_rate, m)?)?;
    m.add_function(wrap_pyfunction!(bound_saturation, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rates, m)?)?;
    m.add_function(wrap_pyfunction!(audit_symbols, m)?)?;
    Ok(())
}
