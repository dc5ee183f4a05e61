//! Python bindings: the model, closed-form and ODE moments, simulation,
//! count normalization and calibration.

use std::fs::File;
use std::io::BufReader;

use ::mvbridge as core;
use core::data::{read_curves_csv, write_curves_csv};
use core::simulate::column_statistics;
use core::{BridgeError, Scheme, SimConfig};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: BridgeError) -> PyErr {
    let m = e.to_string();
    match e {
        BridgeError::Io(_)
        | BridgeError::Json(_)
        | BridgeError::Parse { .. }
        | BridgeError::UnknownDay { .. }
        | BridgeError::NonMonotone { .. } => PyOSError::new_err(m),
        BridgeError::InvalidModel(_)
        | BridgeError::Config(_)
        | BridgeError::WeightSum { .. }
        | BridgeError::TimeNotOnGrid(_)
        | BridgeError::GridMismatch(_)
        | BridgeError::Curves(_) => PyValueError::new_err(m),
        _ => PyRuntimeError::new_err(m),
    }
}

fn io_err(path: &str, e: std::io::Error) -> PyErr {
    PyOSError::new_err(format!("{path}: {e}"))
}

/// Mean-field CIR bridge pinned at zero at t = 0 and t = horizon.
#[pyclass(name = "BridgeModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel(core::BridgeModel);

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (a, r, mu, omega, alpha, horizon = 1.0))]
    fn new(a: f64, r: f64, mu: f64, omega: f64, alpha: f64, horizon: f64) -> PyResult<Self> {
        core::BridgeModel::with_horizon(a, r, mu, omega, alpha, horizon)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a()
    }
    #[getter]
    fn r(&self) -> f64 {
        self.0.r()
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu()
    }
    #[getter]
    fn omega(&self) -> f64 {
        self.0.omega()
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }
    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    fn alpha_bound(&self) -> f64 {
        self.0.alpha_bound()
    }

    fn with_alpha(&self, alpha: f64) -> PyResult<Self> {
        self.0.with_alpha(alpha).map(Self).map_err(to_py)
    }

    fn scale_sigma(&self, factor: f64) -> PyResult<Self> {
        self.0.scale_sigma(factor).map(Self).map_err(to_py)
    }

    fn mean(&self, t: f64) -> f64 {
        core::mean_closed(t, &self.0)
    }

    fn variance(&self, t: f64) -> f64 {
        core::variance_closed(t, &self.0)
    }

    fn std(&self, t: f64) -> f64 {
        core::std_closed(t, &self.0)
    }

    fn mean_integral(&self) -> f64 {
        core::mean_integral(&self.0)
    }

    /// `(t, mean)` at the maximum of the mean curve.
    fn mean_peak(&self) -> (f64, f64) {
        core::mean_peak(&self.0)
    }

    fn feller_index(&self, t: f64, mean_value: f64) -> PyResult<f64> {
        self.0.feller_index(t, mean_value).map_err(to_py)
    }

    fn check_assumption<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = core::check_assumption1_default(&self.0).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("alpha_bound", r.alpha_bound)?;
        d.set_item("alpha_ok", r.alpha_ok)?;
        d.set_item("sigma_positive", r.sigma_positive)?;
        d.set_item("sigma_margin", r.sigma_margin)?;
        d.set_item("overall", r.overall)?;
        Ok(d)
    }

    fn classify_feller<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = core::classify_feller_default(&self.0).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("violated_everywhere", p.violated_everywhere)?;
        d.set_item("satisfied_fraction", p.satisfied_fraction())?;
        d.set_item("satisfied_intervals", p.satisfied_intervals)?;
        d.set_item("grid", p.grid)?;
        d.set_item("values", p.values)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let m = &self.0;
        format!(
            "BridgeModel(a={}, r={}, mu={}, omega={}, alpha={}, horizon={})",
            m.a(),
            m.r(),
            m.mu(),
            m.omega(),
            m.alpha(),
            m.horizon()
        )
    }
}

/// Mean and std curves on a grid; empty bins are `None`.
#[pyclass(name = "MomentCurves", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCurves(core::MomentCurves);

#[pymethods]
impl PyCurves {
    #[new]
    #[pyo3(signature = (grid, mean, std = None))]
    fn new(grid: Vec<f64>, mean: Vec<Option<f64>>, std: Option<Vec<Option<f64>>>) -> PyResult<Self> {
        core::MomentCurves::new(grid, mean, std, core::SourceTag::Empirical)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        read_curves_csv(BufReader::new(f)).map(Self).map_err(to_py)
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        write_curves_csv(&self.0, f).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid.clone()
    }
    #[getter]
    fn mean(&self) -> Vec<Option<f64>> {
        self.0.mean.clone()
    }
    #[getter]
    fn std(&self) -> Option<Vec<Option<f64>>> {
        self.0.std.clone()
    }
    #[getter]
    fn n_obs(&self) -> Option<Vec<usize>> {
        self.0.n_obs.clone()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Closed-form mean and std on `grid`.
#[pyfunction]
fn closed_form(model: &PyModel, grid: Vec<f64>) -> PyResult<PyCurves> {
    core::MomentCurves::closed_form(&model.0, &grid)
        .map(PyCurves)
        .map_err(to_py)
}

/// Mean and std from the moment ODEs (grid points must lie before the horizon).
#[pyfunction]
fn solve_moment_odes(model: &PyModel, grid: Vec<f64>) -> PyResult<PyCurves> {
    core::solve_moment_odes(&model.0, &grid)
        .map(PyCurves)
        .map_err(to_py)
}

/// Simulated paths, `n_paths` rows by `len(grid)` recorded times.
#[pyclass(name = "PathEnsemble", frozen, skip_from_py_object)]
struct PyEnsemble(core::PathEnsemble);

#[pymethods]
impl PyEnsemble {
    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid.clone()
    }
    #[getter]
    fn n_paths(&self) -> usize {
        self.0.n_paths
    }

    fn path(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.0.n_paths {
            return Err(PyValueError::new_err(format!("path {i} out of range")));
        }
        Ok(self.0.path(i).to_vec())
    }

    /// Flat row-major values.
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    /// Per recorded time: `t, mean, std, se_mean, se_std`.
    fn moments<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let stats = column_statistics(&self.0).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("t", stats.iter().map(|s| s.t).collect::<Vec<_>>())?;
        d.set_item("mean", stats.iter().map(|s| s.mean).collect::<Vec<_>>())?;
        d.set_item("std", stats.iter().map(|s| s.std).collect::<Vec<_>>())?;
        d.set_item("se_mean", stats.iter().map(|s| s.se_mean).collect::<Vec<_>>())?;
        d.set_item("se_std", stats.iter().map(|s| s.se_std).collect::<Vec<_>>())?;
        Ok(d)
    }

    /// Histogram log-density at recorded `times`; empty bins are `None`.
    fn log_pdf<'py>(&self, py: Python<'py>, times: Vec<f64>, n_bins: usize) -> PyResult<Bound<'py, PyDict>> {
        let table = core::estimate_log_pdf(&self.0, &times, n_bins).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("times", table.times)?;
        d.set_item("bin_edges", table.bin_edges)?;
        d.set_item("log_density", table.log_density)?;
        Ok(d)
    }

    /// Samples every path at the midpoints of `n_bins` bins and pools the
    /// samples into `grid_bins` empirical bins.
    fn empirical_curves(&self, n_bins: usize, grid_bins: usize) -> PyResult<PyCurves> {
        let days = core::NormalizedEnsemble::from_ensemble(&self.0, n_bins).map_err(to_py)?;
        core::empirical_curves(&days, grid_bins)
            .map(PyCurves)
            .map_err(to_py)
    }
}

fn sim_config(n_steps: usize, n_paths: usize, seed: u64, scheme: &str, stride: usize) -> PyResult<SimConfig> {
    Ok(SimConfig {
        n_steps,
        n_paths,
        master_seed: seed,
        scheme: scheme.parse::<Scheme>().map_err(to_py)?,
        record_stride: stride,
    })
}

#[pyfunction]
#[pyo3(signature = (model, n_steps = 5000, n_paths = 10000, seed = 0, scheme = "frozen-exact", stride = 50))]
fn simulate(
    py: Python<'_>,
    model: &PyModel,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    scheme: &str,
    stride: usize,
) -> PyResult<PyEnsemble> {
    let config = sim_config(n_steps, n_paths, seed, scheme, stride)?;
    let m = model.0;
    py.detach(|| core::simulate_ensemble(&m, &config))
        .map(PyEnsemble)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (model, components, weights = None, n_steps = 5000, n_paths = 10000, seed = 0, scheme = "frozen-exact", stride = 50))]
#[allow(clippy::too_many_arguments)]
fn simulate_superposition(
    py: Python<'_>,
    model: &PyModel,
    components: usize,
    weights: Option<Vec<f64>>,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    scheme: &str,
    stride: usize,
) -> PyResult<PyEnsemble> {
    let config = sim_config(n_steps, n_paths, seed, scheme, stride)?;
    let m = model.0;
    py.detach(|| core::simulate_superposition(&m, components, weights.as_deref(), &config))
        .map(PyEnsemble)
        .map_err(to_py)
}

/// Loads counts and day-table CSVs and normalizes each day to unit sum.
/// Returns `(curves, retained_ids, excluded_ids)`.
#[pyfunction]
#[pyo3(signature = (counts_path, days_path, grid_bins = 100))]
fn normalize_counts(
    counts_path: &str,
    days_path: &str,
    grid_bins: usize,
) -> PyResult<(PyCurves, Vec<String>, Vec<String>)> {
    let days = core::load_day_counts(counts_path.as_ref(), days_path.as_ref()).map_err(to_py)?;
    let normalized = core::normalize_days(&days);
    let curves = core::empirical_curves(&normalized, grid_bins).map_err(to_py)?;
    let retained = normalized.days.iter().map(|d| d.day_id.clone()).collect();
    Ok((PyCurves(curves), retained, normalized.excluded_days))
}

/// Two-step fit. Returns `(model, record)` where `record` holds the fitted
/// parameters, normalized RMSEs and diagnostics.
#[pyfunction]
#[pyo3(signature = (curves, freeze_omega_zero = false, pin_alpha = None, restarts = 8))]
fn calibrate<'py>(
    py: Python<'py>,
    curves: &PyCurves,
    freeze_omega_zero: bool,
    pin_alpha: Option<f64>,
    restarts: usize,
) -> PyResult<(PyModel, Bound<'py, PyDict>)> {
    let config = core::FitConfig {
        freeze_omega_zero,
        pin_alpha,
        restarts,
        ..core::FitConfig::default()
    };
    let c = curves.0.clone();
    let result = py.detach(|| core::calibrate(&c, &config)).map_err(to_py)?;
    let r = result.record();
    let d = PyDict::new(py);
    d.set_item("a", r.a)?;
    d.set_item("r", r.r)?;
    d.set_item("mu", r.mu)?;
    d.set_item("omega", r.omega)?;
    d.set_item("alpha", r.alpha)?;
    d.set_item("rmse_ave", r.rmse_ave)?;
    d.set_item("rmse_std", r.rmse_std)?;
    d.set_item("assumption_ok", r.assumption_ok)?;
    d.set_item("feller_violated_everywhere", r.feller_violated_everywhere)?;
    Ok((PyModel(result.model), d))
}

/// Normalized RMSE of `model`'s closed-form curves against `empirical`.
#[pyfunction]
fn normalized_rmse(model: &PyModel, empirical: &PyCurves) -> PyResult<(f64, f64)> {
    let theory = core::MomentCurves::closed_form(&model.0, &empirical.0.grid).map_err(to_py)?;
    core::normalized_rmse(&theory, &empirical.0, &model.0).map_err(to_py)
}

/// Reference parameter sets as `("mean-field/2023", model)`,
/// `("omega-zero/2023", model)` and so on.
#[pyfunction]
fn fixtures() -> Vec<(String, PyModel)> {
    let tagged = |tag: &'static str, models: Vec<(&'static str, core::BridgeModel)>| {
        models
            .into_iter()
            .map(move |(name, m)| (format!("{tag}/{name}"), PyModel(m)))
    };
    tagged("mean-field", core::fixtures::mean_field_models())
        .chain(tagged("omega-zero", core::fixtures::no_mean_field_models()))
        .collect()
}

#[pymodule]
fn mvbridge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyCurves>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(solve_moment_odes, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_superposition, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_counts, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_rmse, m)?)?;
    m.add_function(wrap_pyfunction!(fixtures, m)?)?;
    Ok(())
}
