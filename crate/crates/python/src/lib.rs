//! Python bindings. Structured results cross the boundary as JSON and come
//! out as plain dicts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use so::verify::{
    check_c1, check_hjb, simulate_perturbed, simulate_value, GridSpec, McConfig, Perturbation,
};
use so::{Action, ProblemData, SwitchError};
use switchopt_core as so;

create_exception!(
    switchopt,
    SolverError,
    PyRuntimeError,
    "A free-boundary solve failed."
);

/// Input problems become `ValueError`, solver failures `SolverError`.
fn to_py(e: SwitchError) -> PyErr {
    match e {
        SwitchError::RootNotBracketed { .. } | SwitchError::PreconditionViolated(_) => {
            SolverError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    obj.py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    loads(py, &text)
}

fn problem_data(obj: &Bound<'_, PyAny>) -> PyResult<ProblemData> {
    ProblemData::from_json(&dumps(obj)?).map_err(to_py)
}

/// A solved instance.
#[pyclass(frozen, name = "Solution", module = "switchopt")]
pub struct PySolution {
    inner: so::Solution,
}

#[pymethods]
impl PySolution {
    /// Parses the output of `to_json`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: so::Solution::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn case(&self) -> &'static str {
        self.inner.case.as_str()
    }

    #[getter]
    fn boundaries<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.boundaries)
    }

    #[getter]
    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.coefficients)
    }

    #[getter]
    fn thresholds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.thresholds)
    }

    #[getter]
    fn regions<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.regions)
    }

    /// `w_z(x)` or its first/second derivative.
    #[pyo3(signature = (z, x, order = 0))]
    fn eval(&self, z: u8, x: f64, order: u8) -> PyResult<f64> {
        self.inner.eval(z, x, order).map_err(to_py)
    }

    /// `"continue"`, `"switch"` or `"abandon"`.
    fn action(&self, z: u8, x: f64) -> PyResult<&'static str> {
        if z > 1 || !(x > 0.0) {
            return Err(PyValueError::new_err("need z in {0, 1} and x > 0"));
        }
        Ok(match self.inner.optimal_action(z, x) {
            Action::Continue => "continue",
            Action::SwitchTo(_) => "switch",
            Action::Abandon => "abandon",
        })
    }

    fn region(&self, z: u8, x: f64) -> PyResult<&'static str> {
        if z > 1 || !(x > 0.0) {
            return Err(PyValueError::new_err("need z in {0, 1} and x > 0"));
        }
        Ok(self.inner.regions.label(z, x))
    }

    /// Largest gaps in value and slope at each interior boundary.
    fn c1<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let gaps: Vec<_> = check_c1(&self.inner)
            .into_iter()
            .map(|g| serde_json::json!({ "gap": g, "pass": g.passes() }))
            .collect();
        to_dict(py, &gaps)
    }

    /// HJB report on `[x_min, x_max]` (default: around the boundaries).
    #[pyo3(signature = (x_min = None, x_max = None, points = 1000, log = true))]
    fn hjb<'py>(
        &self,
        py: Python<'py>,
        x_min: Option<f64>,
        x_max: Option<f64>,
        points: usize,
        log: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let around = GridSpec::around(&self.inner);
        let grid = GridSpec {
            x_min: x_min.unwrap_or(around.x_min),
            x_max: x_max.unwrap_or(around.x_max),
            points,
            log,
        };
        if !(grid.x_min > 0.0 && grid.x_max > grid.x_min && points >= 2) {
            return Err(PyValueError::new_err(
                "grid needs 0 < x_min < x_max and points >= 2",
            ));
        }
        to_dict(py, &check_hjb(&self.inner, &grid))
    }

    /// Monte Carlo estimate of `w_z(x)` under the optimal policy, optionally
    /// with one boundary moved by a relative amount.
    #[pyo3(signature = (z, x, paths = 100_000, dt = None, horizon = None, seed = 0, threads = 0, perturb = None))]
    #[allow(clippy::too_many_arguments)]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        z: u8,
        x: f64,
        paths: usize,
        dt: Option<f64>,
        horizon: Option<f64>,
        seed: u64,
        threads: usize,
        perturb: Option<(String, f64)>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let base = McConfig::for_rate(self.inner.problem().r());
        let cfg = McConfig {
            paths,
            dt: dt.unwrap_or(base.dt),
            horizon: horizon.unwrap_or(base.horizon),
            seed,
            threads,
            ..base
        };
        let sol = &self.inner;
        let res = py
            .detach(|| match perturb {
                Some((boundary, relative)) => {
                    simulate_perturbed(sol, z, x, &cfg, &Perturbation { boundary, relative })
                }
                None => simulate_value(sol, z, x, &cfg),
            })
            .map_err(to_py)?;
        to_dict(py, &res)
    }

    fn __repr__(&self) -> String {
        let b: Vec<String> = self
            .inner
            .boundaries
            .named()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("Solution(case={}, {})", self.inner.case, b.join(", "))
    }
}

/// Classify and solve a problem given as a dict or JSON string.
#[pyfunction]
fn solve(problem: &Bound<'_, PyAny>) -> PyResult<PySolution> {
    let data = problem_data(problem)?;
    let inner = problem
        .py()
        .detach(|| so::build_solution(&data))
        .map_err(to_py)?;
    Ok(PySolution { inner })
}

/// `{"case": ..., <thresholds computed on the way>}`.
#[pyfunction]
fn classify<'py>(problem: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let p = so::Problem::new(problem_data(problem)?).map_err(to_py)?;
    let c = so::classify(&p).map_err(to_py)?;
    let d = to_dict(problem.py(), &c.thresholds)?;
    d.cast::<PyDict>()?.set_item("case", c.case.as_str())?;
    Ok(d)
}

/// Fundamental roots `(m, n)` of `σ²k(k−1) + bk − r = 0`.
#[pyfunction]
fn roots(b: f64, sigma2: f64, r: f64) -> PyResult<(f64, f64)> {
    let market = so::MarketParams::new(b, sigma2, r).map_err(to_py)?;
    let fr = so::compute_roots(&market);
    Ok((fr.m, fr.n))
}

#[pymodule]
pub fn switchopt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(roots, m)?)?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
