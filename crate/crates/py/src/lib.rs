//! Python bindings for switchsde.

use pyo3::create_exception;
use pyo3::exceptions::{PyNotImplementedError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use switchsde::cli::parse_thresholds;
use switchsde::lifetime::{self, Engine, SeriesSpec};
use switchsde::metrics::{self, EmpiricalSample};
use switchsde::model::{EquationSpec, RegimeBound};
use switchsde::moment;
use switchsde::oscillation::{default_dt, kappa, OscillationSchedule};
use switchsde::simulate::{run, SimConfig};
use switchsde::{Error, MomentCurve};

create_exception!(switchsde_py, BlowUpError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Unsupported(m) => PyNotImplementedError::new_err(m),
        Error::BlowUp(b) => BlowUpError::new_err(format!("blow-up at t = {} (particle {})", b.time, b.particle)),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Equation spec: partition, per-regime coefficients and initial law.
#[pyclass(name = "Spec", module = "switchsde_py", skip_from_py_object)]
#[derive(Clone)]
struct PySpec {
    inner: EquationSpec,
}

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self { inner: switchsde::presets::preset(name).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: EquationSpec::from_toml(text).and_then(EquationSpec::validated).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: switchsde::cli::load_spec(path).map_err(to_py)? })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(to_py)
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.inner.name.clone()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    fn __repr__(&self) -> String {
        format!("Spec(name={:?}, p={}, dim={})", self.inner.name, self.inner.p, self.inner.dim)
    }
}

fn curve_dict<'py>(py: Python<'py>, c: &MomentCurve) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", c.times.clone())?;
    d.set_item("g", c.g_values.clone())?;
    d.set_item("stderr", c.std_errors.clone())?;
    d.set_item("regime", c.regime_trace.clone())?;
    let crossings: Vec<(f64, usize, f64, bool)> =
        c.crossings.iter().map(|x| (x.time, x.threshold, x.level, x.upward)).collect();
    d.set_item("crossings", crossings)?;
    d.set_item("provenance", c.provenance.as_str())?;
    Ok(d)
}

/// Particle simulation; returns the moment curve as a dict.
#[pyfunction]
#[pyo3(signature = (spec, n, dt, horizon, seed=0, threads=None, record_every=1, antithetic=false))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    spec: &PySpec,
    n: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
    threads: Option<usize>,
    record_every: usize,
    antithetic: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SimConfig { threads, record_every, antithetic, ..SimConfig::new(n, dt, horizon, seed) };
    let spec = spec.inner.clone();
    let (curve, _) = py.detach(|| run(&spec, &cfg)).map_err(to_py)?;
    curve_dict(py, &curve)
}

/// Moment-equation solve; returns (verdict line, curve dict).
#[pyfunction]
#[pyo3(signature = (spec, t0=0.0, horizon=2.0, dt=1e-3))]
fn solve_moment<'py>(
    py: Python<'py>,
    spec: &PySpec,
    t0: f64,
    horizon: f64,
    dt: f64,
) -> PyResult<(String, Bound<'py, PyDict>)> {
    let (curve, verdict) = moment::solve_moment_equation(&spec.inner, t0, horizon, dt).map_err(to_py)?;
    Ok((verdict.to_string(), curve_dict(py, &curve)?))
}

#[pyfunction]
#[pyo3(signature = (spec, t0=0.0, eps=0.1))]
fn check_nonexistence(spec: &PySpec, t0: f64, eps: f64) -> PyResult<String> {
    let gmf = moment::regime_moment_functions(&spec.inner, t0).map_err(to_py)?;
    let v = moment::check_nonexistence(&gmf, t0, eps, spec.inner.partition.side(1)).map_err(to_py)?;
    Ok(v.to_string())
}

/// T_1, ..., T_n for dX = X dt + n^alpha dB on [y_{n-1}, y_n).
#[pyfunction]
#[pyo3(signature = (alpha, m0, n_max, thresholds="k"))]
fn crossing_times_closed_form(alpha: f64, m0: f64, n_max: usize, thresholds: &str) -> PyResult<Vec<f64>> {
    let y = parse_thresholds(thresholds).map_err(to_py)?;
    lifetime::crossing_times_example26(alpha, &y, m0, n_max).map_err(to_py)
}

/// Returns (classification, partial sums, evidence). `family` is "closed-form" or "growth".
#[pyfunction]
#[pyo3(signature = (family, alpha=1.0, thresholds="k", kb=1.0, n_max=1000))]
fn classify_series(
    family: &str,
    alpha: f64,
    thresholds: &str,
    kb: f64,
    n_max: usize,
) -> PyResult<(String, Vec<f64>, String)> {
    let y = parse_thresholds(thresholds).map_err(to_py)?;
    let series = match family {
        "closed-form" | "example26" => SeriesSpec::closed_form(alpha, y),
        "growth" | "condition23" => SeriesSpec::growth_bound(kb, RegimeBound::PowerLaw { scale: 1.0, exponent: alpha }, y),
        other => return Err(PyValueError::new_err(format!("unknown series family '{other}'"))),
    };
    let r = lifetime::classify_series(&series, n_max, f64::INFINITY).map_err(to_py)?;
    Ok((r.classification.to_string(), r.partial_sums, r.evidence))
}

/// Analytic lifetime construction; returns a dict with crossing times and the verdict.
#[pyfunction]
#[pyo3(signature = (spec, n_max=64, step=1e-3, horizon=50.0))]
fn construct_lifetime<'py>(
    py: Python<'py>,
    spec: &PySpec,
    n_max: usize,
    step: f64,
    horizon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = lifetime::construct_lifetime(&spec.inner, &Engine::Analytic { step, horizon }, n_max).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("crossing_times", r.crossing_times.clone())?;
    d.set_item("verdict", r.verdict.to_string())?;
    d.set_item("stop", r.stop.to_string())?;
    d.set_item("terminated_at", r.terminated_at)?;
    d.set_item("series_partial_sums", r.series_partial_sums().to_vec())?;
    Ok(d)
}

/// (m_numeric, m_formula) for the oscillating schedule started at s.
#[pyfunction]
#[pyo3(signature = (s, alpha=0.25, dt=None))]
fn oscillation_m(s: f64, alpha: f64, dt: Option<f64>) -> PyResult<(Option<f64>, Option<f64>)> {
    let schedule = OscillationSchedule::new(alpha).map_err(to_py)?;
    let dt = match dt {
        Some(dt) => dt,
        None => default_dt(kappa(s).map_err(to_py)?),
    };
    let sol = schedule.solve_delayed_equation(s, dt).map_err(to_py)?;
    Ok((sol.m_numeric, schedule.m_of_s_caseformula(s).ok()))
}

#[pyfunction]
fn wasserstein_1d(a: Vec<f64>, b: Vec<f64>, p: f64) -> PyResult<f64> {
    let a = EmpiricalSample::scalar(a).map_err(to_py)?;
    let b = EmpiricalSample::scalar(b).map_err(to_py)?;
    metrics::wasserstein_1d(&a, &b, p).map_err(to_py)
}

/// `points` is a list of d-vectors.
#[pyfunction]
fn wasserstein_to_dirac(points: Vec<Vec<f64>>, z: Vec<f64>, p: f64) -> PyResult<f64> {
    let d = z.len();
    if points.iter().any(|x| x.len() != d) {
        return Err(PyValueError::new_err("every point must have the length of z"));
    }
    let sample = EmpiricalSample::new(points.concat(), d).map_err(to_py)?;
    metrics::wasserstein_to_dirac(&sample, &z, p).map_err(to_py)
}

#[pymodule]
fn switchsde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add("BlowUpError", m.py().get_type::<BlowUpError>())?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_moment, m)?)?;
    m.add_function(wrap_pyfunction!(check_nonexistence, m)?)?;
    m.add_function(wrap_pyfunction!(crossing_times_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(classify_series, m)?)?;
    m.add_function(wrap_pyfunction!(construct_lifetime, m)?)?;
    m.add_function(wrap_pyfunction!(oscillation_m, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_1d, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_to_dirac, m)?)?;
    Ok(())
}
