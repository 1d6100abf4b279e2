//! Python bindings: domains, metric and distance estimates, closed forms and the
//! experiment runner.

use holokit::experiments::{render_csv, run_experiment as run, version, ExperimentConfig};
use holokit::metrics::{
    caratheodory_inf_lower, closed_form_distance as cf_distance, closed_form_inf_metric as cf_metric, kobayashi_distance_estimate,
    kobayashi_inf_estimate, DiscConfig, LowerConfig, ModelKind, PathConfig,
};
use holokit::{parse_domain_spec, preset_domain, Domain, Error};
use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyTimeoutError, PyValueError};
use pyo3::prelude::*;

create_exception!(holokit_py, HolokitError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Budget(m) => PyTimeoutError::new_err(m),
        e @ (Error::InvalidArgument(_)
        | Error::Precondition(_)
        | Error::OutsideDomain(_)
        | Error::Schema { .. }
        | Error::Validation(_)
        | Error::UnknownPreset(_)
        | Error::NonReal { .. }) => PyValueError::new_err(e.to_string()),
        e => HolokitError::new_err(e.to_string()),
    }
}

fn model(name: &str) -> PyResult<ModelKind> {
    ModelKind::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown model {name:?}")))
}

/// A bounded domain `{ρ < 0}` (or an intersection of such pieces).
#[pyclass(name = "Domain", module = "holokit", frozen)]
struct PyDomain {
    inner: Domain,
}

#[pymethods]
impl PyDomain {
    /// Named preset such as `ball:2`, `egg:2`, `polydisc:2` or `perturbed_ball:16:1`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(PyDomain { inner: preset_domain(name).map_err(to_py)? })
    }

    /// Domain from its JSON description.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyDomain { inner: parse_domain_spec(text).map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn domain_class(&self) -> &'static str {
        self.inner.class.name()
    }

    #[getter]
    fn declared_type(&self) -> Option<u32> {
        self.inner.declared_type
    }

    #[getter]
    fn base_point(&self) -> Vec<C64> {
        self.inner.base_point.clone()
    }

    fn rho(&self, z: Vec<C64>) -> PyResult<f64> {
        self.check_dim(&z)?;
        self.inner.eval_rho(&z).map_err(to_py)
    }

    fn contains(&self, z: Vec<C64>) -> PyResult<bool> {
        self.check_dim(&z)?;
        Ok(self.inner.contains(&z))
    }

    /// `(∂ρ/∂z_1, ..., ∂ρ/∂z_n)`.
    fn gradient(&self, z: Vec<C64>) -> PyResult<Vec<C64>> {
        self.check_dim(&z)?;
        Ok(self.inner.wirtinger_gradient(&z))
    }

    /// `(distance, foot)` for the closest boundary point.
    fn boundary_distance(&self, z: Vec<C64>) -> PyResult<(f64, Vec<C64>)> {
        self.check_dim(&z)?;
        let f = self.inner.boundary_distance(&z).map_err(to_py)?;
        Ok((f.distance, f.foot))
    }

    fn __repr__(&self) -> String {
        format!("Domain({:?}, n={}, class={})", self.inner.name, self.inner.n(), self.inner.class.name())
    }
}

impl PyDomain {
    fn check_dim(&self, z: &[C64]) -> PyResult<()> {
        if z.len() != self.inner.n() {
            return Err(PyValueError::new_err(format!("expected {} coordinates, got {}", self.inner.n(), z.len())));
        }
        Ok(())
    }
}

/// Upper bound for the Kobayashi metric `F^K(z, v)` from an extremal-disc search.
#[pyfunction]
#[pyo3(signature = (domain, z, v, *, seed = 0, degree = 8, samples = 256, iterations = 3000))]
fn kobayashi_metric(py: Python<'_>, domain: &PyDomain, z: Vec<C64>, v: Vec<C64>, seed: u64, degree: usize, samples: usize, iterations: usize) -> PyResult<f64> {
    domain.check_dim(&z)?;
    domain.check_dim(&v)?;
    let cfg = DiscConfig { degree, samples, iterations, seed, ..DiscConfig::default() };
    let d = &domain.inner;
    py.detach(|| kobayashi_inf_estimate(d, &z, &v, &cfg)).map(|m| m.value).map_err(to_py)
}

/// Lower bound for the Carathéodory metric `F^C(z, v)`.
#[pyfunction]
#[pyo3(signature = (domain, z, v, *, seed = 0))]
fn caratheodory_metric(py: Python<'_>, domain: &PyDomain, z: Vec<C64>, v: Vec<C64>, seed: u64) -> PyResult<f64> {
    domain.check_dim(&z)?;
    domain.check_dim(&v)?;
    let cfg = LowerConfig { seed, ..LowerConfig::default() };
    let d = &domain.inner;
    py.detach(|| caratheodory_inf_lower(d, &z, &v, &cfg)).map(|m| m.value).map_err(to_py)
}

/// Upper bound for the Kobayashi distance from an optimized polyline.
#[pyfunction]
#[pyo3(signature = (domain, p, q, *, seed = 0, straight = false))]
fn kobayashi_distance(py: Python<'_>, domain: &PyDomain, p: Vec<C64>, q: Vec<C64>, seed: u64, straight: bool) -> PyResult<f64> {
    domain.check_dim(&p)?;
    domain.check_dim(&q)?;
    let base = if straight { PathConfig::straight() } else { PathConfig::default() };
    let cfg = PathConfig { search: base.search.clone().with_seed(seed), report: base.report.clone().with_seed(seed), ..base };
    let d = &domain.inner;
    py.detach(|| kobayashi_distance_estimate(d, &p, &q, &cfg)).map(|e| e.value).map_err(to_py)
}

/// Exact infinitesimal metric on a model domain (`disc`, `ball`, `polydisc`, `halfplane`, `siegel`).
#[pyfunction]
fn closed_form_metric(model_name: &str, z: Vec<C64>, v: Vec<C64>) -> PyResult<f64> {
    cf_metric(model(model_name)?, &z, &v).map(|m| m.value).map_err(to_py)
}

/// Exact Kobayashi distance on a model domain.
#[pyfunction]
fn closed_form_distance(model_name: &str, p: Vec<C64>, q: Vec<C64>) -> PyResult<f64> {
    cf_distance(model(model_name)?, &p, &q).map_err(to_py)
}

/// Runs an experiment from its JSON config; returns `(csv, summary)`.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &str) -> PyResult<(String, Bound<'py, PyAny>)> {
    let cfg = ExperimentConfig::from_json(config).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    let out = py.detach(|| run(&cfg)).map_err(to_py)?;
    let csv = render_csv(&out.rows).map_err(to_py)?;
    let summary = py.import("json")?.call_method1("loads", (out.summary.to_string(),))?;
    Ok((csv, summary))
}

#[pymodule]
fn holokit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", version())?;
    m.add("HolokitError", m.py().get_type::<HolokitError>())?;
    m.add_class::<PyDomain>()?;
    m.add_function(wrap_pyfunction!(kobayashi_metric, m)?)?;
    m.add_function(wrap_pyfunction!(caratheodory_metric, m)?)?;
    m.add_function(wrap_pyfunction!(kobayashi_distance, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_metric, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_distance, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
