//! Python bindings for lelab-core.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use lelab_core::config::{self, RunConfig};
use lelab_core::constants::{self, BubbleConstants};
use lelab_core::expansion;
use lelab_core::ground_state::{self, GroundState, SolverOptions};
use lelab_core::hyperbola::{Exponent, HyperbolaPoint};
use lelab_core::manifold::ModelManifold;
use lelab_core::{pipeline, reduced_energy, Error};

create_exception!(lelab, LelabError, PyException);

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::InvalidExponent(_)
        | Error::NotOnHyperbola { .. }
        | Error::UnsupportedRegime(_)
        | Error::InvalidParameter(_)
        | Error::ChartViolation { .. }
        | Error::Separation(_) => PyValueError::new_err(e.to_string()),
        other => LelabError::new_err(other.to_string()),
    }
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| LelabError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn exponent(s: &str) -> PyResult<Exponent> {
    s.parse().map_err(err)
}

#[pyclass(name = "HyperbolaPoint", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPoint(HyperbolaPoint);

#[pymethods]
impl PyPoint {
    /// `p` and `q` accept "3/2" or "1.5"; `q` defaults to the conjugate exponent.
    #[new]
    #[pyo3(signature = (p, n, q = None))]
    fn new(p: &str, n: u32, q: Option<&str>) -> PyResult<Self> {
        let p = exponent(p)?;
        let point = match q {
            Some(q) => HyperbolaPoint::new(p, exponent(q)?, n),
            None => HyperbolaPoint::from_p(p, n),
        };
        point.map(Self).map_err(err)
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.0.q()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.0.n()
    }

    #[getter]
    fn regime(&self) -> String {
        self.0.regime().tag.to_string()
    }

    fn decay_rates(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.decay_rates())
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "HyperbolaPoint(p={}, q={}, N={})",
            self.0.p_exponent(),
            self.0.q_exponent(),
            self.0.n()
        )
    }
}

#[pyclass(name = "GroundState", frozen)]
struct PyGroundState(GroundState);

#[pymethods]
impl PyGroundState {
    #[getter]
    fn point(&self) -> PyPoint {
        PyPoint(*self.0.point())
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid().to_vec()
    }

    #[getter]
    fn r_max(&self) -> f64 {
        self.0.r_max()
    }

    /// Returns (U, V, U', V') at radius r, using the tail model past r_max.
    fn eval(&self, r: f64) -> (f64, f64, f64, f64) {
        let [u, v, du, dv] = self.0.eval(r);
        (u, v, du, dv)
    }

    fn rescale(&self, delta: f64) -> PyResult<Self> {
        ground_state::rescale(&self.0, delta).map(Self).map_err(err)
    }

    fn gauge_factors(&self, delta: f64) -> (f64, f64) {
        self.0.gauge_factors(delta)
    }

    fn max_residual(&self) -> f64 {
        self.0.max_residual()
    }

    fn constants(&self) -> PyResult<PyConstants> {
        constants::compute_constants(&self.0).map(PyConstants).map_err(err)
    }

    fn kernel_residual(&self, py: Python<'_>, seed: u64) -> PyResult<Py<PyAny>> {
        let k = py.detach(|| expansion::kernel_residual(&self.0, seed));
        to_py(py, &k)
    }
}

#[pyclass(name = "BubbleConstants", frozen)]
struct PyConstants(BubbleConstants);

#[pymethods]
impl PyConstants {
    #[getter]
    fn values(&self) -> [f64; 7] {
        self.0.values
    }

    #[getter]
    fn errors(&self) -> [f64; 7] {
        self.0.errors
    }

    fn l(&self, i: usize) -> PyResult<f64> {
        if !(1..=7).contains(&i) {
            return Err(PyValueError::new_err("constants are L1..L7"));
        }
        Ok(self.0.l(i))
    }

    fn phi_coefficient(&self) -> f64 {
        self.0.phi_coefficient()
    }

    fn c_tilde(&self, alpha: f64, beta: f64) -> PyResult<f64> {
        constants::c_tilde(&self.0, alpha, beta).map_err(err)
    }

    fn optimal_t(&self, alpha: f64, beta: f64, phi: f64) -> PyResult<f64> {
        reduced_energy::optimal_t(&self.0, alpha, beta, phi).map_err(err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }
}

#[pyfunction]
#[pyo3(signature = (point, r_max = None, tol = None))]
fn solve_ground_state(
    py: Python<'_>,
    point: &PyPoint,
    r_max: Option<f64>,
    tol: Option<f64>,
) -> PyResult<PyGroundState> {
    let mut opts = SolverOptions::default();
    if let Some(r) = r_max {
        opts.r_max = r;
    }
    if let Some(t) = tol {
        opts.rtol = t;
    }
    let point = point.0;
    py.detach(|| ground_state::solve_at(&point, &opts))
        .map(PyGroundState)
        .map_err(err)
}

/// Returns (kappa, target) for a sphere of the given radius or a cubic flat torus.
#[pyfunction]
#[pyo3(signature = (kind, n, scale))]
fn manifold_check(kind: &str, n: u32, scale: f64) -> PyResult<(f64, f64)> {
    let m = match kind {
        "sphere" => ModelManifold::sphere(n, scale),
        "flat_torus" | "flat-torus" | "torus" => ModelManifold::cubic_torus(n, scale),
        other => return Err(PyValueError::new_err(format!("unknown manifold kind {other:?}"))),
    }
    .map_err(err)?;
    pipeline::manifold_check(&m).map_err(err)
}

/// Runs the pipeline on a TOML config and returns the report as a dict.
#[pyfunction]
fn run(py: Python<'_>, config_toml: &str) -> PyResult<Py<PyAny>> {
    let cfg = RunConfig::from_toml(config_toml).map_err(err)?;
    let report = py.detach(|| pipeline::run(&cfg)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn default_config() -> PyResult<String> {
    RunConfig::default().to_toml().map_err(err)
}

#[pyfunction]
fn config_schema(py: Python<'_>) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (config::schema(),))?.unbind())
}

#[pymodule]
fn lelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LelabError", m.py().get_type::<LelabError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPoint>()?;
    m.add_class::<PyGroundState>()?;
    m.add_class::<PyConstants>()?;
    m.add_function(wrap_pyfunction!(solve_ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(manifold_check, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_schema, m)?)?;
    Ok(())
}
