//! Python bindings: grids, fields, pair states, evolution, observables and
//! the experiment runners (reports are returned as JSON text).

use kgscatter::dynamics::{self, Dealias, EvolutionConfig, NonlinearitySpec};
use kgscatter::experiments;
use kgscatter::observables;
use kgscatter::spectral::{self, C64};
use kgscatter::symmetry;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn spec_of(name: &str) -> PyResult<NonlinearitySpec> {
    name.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// Periodic grid on `[−L, L)` with `n` points.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGrid(spectral::GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(half_length: f64, n_points: usize) -> PyResult<Self> {
        spectral::GridSpec::new(half_length, n_points).map(PyGrid).map_err(err)
    }

    #[getter]
    fn half_length(&self) -> f64 {
        self.0.half_length()
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    fn x(&self) -> Vec<f64> {
        self.0.xs()
    }

    /// Angular frequencies in FFT order.
    fn xi(&self) -> Vec<f64> {
        self.0.frequencies()
    }

    fn __repr__(&self) -> String {
        format!("Grid(half_length={}, n_points={})", self.0.half_length(), self.0.n_points())
    }
}

/// Complex samples on a grid.
#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyField(spectral::SpectralField);

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (grid, re, im = None))]
    fn new(grid: &PyGrid, re: Vec<f64>, im: Option<Vec<f64>>) -> PyResult<Self> {
        let im = im.unwrap_or_else(|| vec![0.0; re.len()]);
        if im.len() != re.len() {
            return Err(PyValueError::new_err("re and im must have the same length"));
        }
        let values = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        spectral::SpectralField::new(grid.0, values).map(PyField).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn re(&self) -> Vec<f64> {
        self.0.re()
    }

    fn im(&self) -> Vec<f64> {
        self.0.im()
    }

    fn mass(&self) -> f64 {
        observables::mass(&self.0)
    }

    fn sobolev_norm(&self, s: f64) -> f64 {
        spectral::sobolev_norm(&self.0, s)
    }

    /// `L^p` norm; pass `float("inf")` for the max norm.
    fn lebesgue_norm(&self, p: f64) -> PyResult<f64> {
        if !(p >= 1.0) {
            return Err(PyValueError::new_err("p must be >= 1"));
        }
        Ok(spectral::lebesgue_norm(&self.0, p))
    }

    fn boost(&self, nu: f64) -> PyResult<PyField> {
        symmetry::boost(&self.0, nu).map(PyField).map_err(err)
    }

    fn translate(&self, y: f64) -> PyField {
        PyField(symmetry::translate(&self.0, y))
    }

    /// `e^{−it⟨∂⟩}` applied to the field.
    fn propagate(&self, t: f64) -> PyField {
        PyField(symmetry::free_kg_propagate(&self.0, t))
    }

    fn low_pass(&self, cutoff: f64) -> PyField {
        PyField(spectral::low_pass(&self.0, cutoff))
    }

    fn max_abs_diff(&self, other: &PyField) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

/// Real pair `(u, u_t)` at time `t`.
#[pyclass(name = "State", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyState(dynamics::PairState);

#[pymethods]
impl PyState {
    #[new]
    #[pyo3(signature = (grid, u, ut, t = 0.0))]
    fn new(grid: &PyGrid, u: Vec<f64>, ut: Vec<f64>, t: f64) -> PyResult<Self> {
        dynamics::PairState::new(grid.0, u, ut, t).map(PyState).map_err(err)
    }

    #[staticmethod]
    fn from_first_order(v: &PyField, t: f64) -> PyState {
        PyState(dynamics::from_first_order(&v.0, t))
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.0.u.clone()
    }

    #[getter]
    fn ut(&self) -> Vec<f64> {
        self.0.ut.clone()
    }

    #[getter]
    fn t(&self) -> f64 {
        self.0.t
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid)
    }

    fn first_order(&self) -> PyField {
        PyField(dynamics::to_first_order(&self.0))
    }

    fn energy(&self, nonlinearity: &str) -> PyResult<f64> {
        Ok(observables::energy(&self.0, spec_of(nonlinearity)?))
    }

    fn momentum(&self) -> f64 {
        observables::momentum(&self.0)
    }

    fn linf(&self) -> f64 {
        self.0.linf()
    }
}

/// Result of [`evolve`]: snapshots and the blowup time, if any.
#[pyclass(name = "Trajectory", frozen)]
pub struct PyTrajectory(dynamics::Trajectory);

#[pymethods]
impl PyTrajectory {
    fn times(&self) -> Vec<f64> {
        self.0.times()
    }

    fn __len__(&self) -> usize {
        self.0.snapshots.len()
    }

    fn snapshot(&self, i: usize) -> PyResult<PyState> {
        self.0
            .snapshots
            .get(i)
            .cloned()
            .map(PyState)
            .ok_or_else(|| PyValueError::new_err("snapshot index out of range"))
    }

    #[getter]
    fn blowup_time(&self) -> Option<f64> {
        self.0.blowup.map(|b| b.time)
    }
}

#[pyfunction]
#[pyo3(signature = (state, dt, t_final, nonlinearity, snapshot_stride = 10, dealias = "exp_filter"))]
fn evolve(
    state: &PyState,
    dt: f64,
    t_final: f64,
    nonlinearity: &str,
    snapshot_stride: usize,
    dealias: &str,
) -> PyResult<PyTrajectory> {
    let cfg = EvolutionConfig {
        dt,
        t_final,
        snapshot_stride,
        dealias: dealias.parse::<Dealias>().map_err(|e: String| PyValueError::new_err(e))?,
        ..Default::default()
    };
    dynamics::evolve(&state.0, &cfg, spec_of(nonlinearity)?)
        .map(PyTrajectory)
        .map_err(err)
}

/// `(samples of ∜2·Q, spectral residual)` on `grid`.
#[pyfunction]
fn ground_state(grid: &PyGrid) -> (Vec<f64>, f64) {
    let g = observables::ground_state(&grid.0);
    (g.values, g.residual)
}

fn report_json(r: &experiments::ExperimentReport) -> PyResult<String> {
    serde_json::to_string(r).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (seed = 1))]
fn run_identities(seed: u64) -> PyResult<String> {
    report_json(&experiments::run_identities(seed))
}

#[pyfunction]
fn run_symmetry_check(grid: &PyGrid) -> PyResult<String> {
    report_json(&experiments::run_symmetry_check(grid.0).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (grid, amplitude, width = 1.0, exponents = vec![6.0], t_start = 10.0, t_end = 100.0, samples = 24))]
fn run_decay_fit(
    grid: &PyGrid,
    amplitude: f64,
    width: f64,
    exponents: Vec<f64>,
    t_start: f64,
    t_end: f64,
    samples: usize,
) -> PyResult<String> {
    let p = experiments::DecayParams {
        grid: grid.0,
        profile: experiments::Profile::Gaussian {
            amplitude,
            width,
            center: 0.0,
            velocity: 0.0,
        },
        exponents,
        t_range: (t_start, t_end),
        samples,
        tolerance: 0.05,
    };
    report_json(&experiments::run_decay_fit(&p).map_err(err)?)
}

#[pymodule]
#[pyo3(name = "kgscatter")]
fn kgscatter_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", kgscatter::VERSION)?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(run_identities, m)?)?;
    m.add_function(wrap_pyfunction!(run_symmetry_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_decay_fit, m)?)?;
    Ok(())
}
