//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use frontspeed::cli::speeds as speeds_report;
use frontspeed::lmn::pushed_certificate;
use frontspeed::pde::{simulate_family, InitialCondition, SimConfig};
use frontspeed::profile::{explicit_profile, numeric_profile, DEFAULT_Z_SPAN};
use frontspeed::shoot::{family_minimal_speed, family_reaction, shoot_once, ShootOptions};
use frontspeed::speeds;
use frontspeed::sweep::{refine_table, run_sweep, SweepOptions};
use frontspeed::variational::{hr_bound_nu_family, numeric_minmax as minmax, MinmaxOptions};
use frontspeed::{Error, SolvableFamily};

create_exception!(pyfrontspeed, FrontspeedError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::UnknownBuiltin(_)
        | Error::Syntax { .. }
        | Error::UnknownIdentifier { .. }
        | Error::UnknownFunction { .. } => PyValueError::new_err(e.to_string()),
        _ => FrontspeedError::new_err(e.to_string()),
    }
}

/// Serializes through JSON and hands the text to Python's `json.loads`.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| FrontspeedError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A solvable family `f = h(A − B·h′)`, normalized to `h′(0) = 1`.
#[pyclass(name = "Family", module = "pyfrontspeed", frozen)]
pub struct PyFamily {
    inner: SolvableFamily,
}

#[pymethods]
impl PyFamily {
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let inner = SolvableFamily::builtin(name)
            .and_then(|f| f.with_unit_slope())
            .map_err(to_py)?;
        Ok(PyFamily { inner })
    }

    /// `h` in `u`; `a` and `b` in `beta`.
    #[staticmethod]
    #[pyo3(signature = (h, a, b, name = "custom"))]
    fn custom(h: &str, a: &str, b: &str, name: &str) -> PyResult<Self> {
        let inner = SolvableFamily::from_sources(name, h, a, b)
            .and_then(|f| f.with_unit_slope())
            .map_err(to_py)?;
        Ok(PyFamily { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn coefficients(&self, beta: f64) -> PyResult<(f64, f64)> {
        self.inner.coefficients(beta).map_err(to_py)
    }

    fn f(&self, u: f64, beta: f64) -> PyResult<f64> {
        self.inner.eval_f(u, beta).map_err(to_py)
    }

    #[pyo3(signature = (beta, grid_n = 1000))]
    fn validate<'py>(&self, py: Python<'py>, beta: f64, grid_n: usize) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.inner.validate(beta, grid_n).map_err(to_py)?)
    }

    /// `(sup h′, inf h′)` on [0, 1].
    #[pyo3(signature = (grid_n = 4001))]
    fn hprime_extrema(&self, grid_n: usize) -> PyResult<(f64, f64)> {
        let e = self.inner.hprime_extrema(grid_n, 1e-12).map_err(to_py)?;
        Ok((e.sup, e.inf))
    }

    fn linear_speed(&self, beta: f64) -> PyResult<f64> {
        speeds::linear_speed(&self.inner, beta).map_err(to_py)
    }

    fn nonlinear_speed(&self, beta: f64) -> PyResult<f64> {
        speeds::nonlinear_speed(&self.inner, beta).map_err(to_py)
    }

    fn gamma(&self, beta: f64) -> PyResult<f64> {
        speeds::gamma(&self.inner, beta).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Family({:?})", self.inner.name)
    }
}

fn valid(fam: &PyFamily, beta: f64) -> PyResult<SolvableFamily> {
    fam.inner
        .validate(beta, 1000)
        .and_then(|r| r.into_result())
        .map_err(to_py)
}

#[pyfunction]
fn minimal_speed<'py>(py: Python<'py>, family: &PyFamily, beta: f64) -> PyResult<Bound<'py, PyAny>> {
    let fam = valid(family, beta)?;
    let r = py
        .detach(|| family_minimal_speed(&fam, beta, &ShootOptions::default()))
        .map_err(to_py)?;
    to_object(py, &r)
}

/// Speeds, shooting result, regime, bound and certificate at one β.
#[pyfunction]
fn speeds_at<'py>(py: Python<'py>, family: &PyFamily, beta: f64) -> PyResult<Bound<'py, PyAny>> {
    let out = py
        .detach(|| speeds_report(&family.inner, beta, &SweepOptions::default()))
        .map_err(to_py)?;
    to_object(py, &out)
}

#[pyfunction]
#[pyo3(signature = (family, betas, refine = false))]
fn sweep<'py>(py: Python<'py>, family: &PyFamily, betas: Vec<f64>, refine: bool) -> PyResult<Bound<'py, PyAny>> {
    let opts = SweepOptions::default();
    let table = py
        .detach(|| {
            let mut t = run_sweep(&family.inner, &betas, &opts)?;
            if refine {
                refine_table(&family.inner, &mut t, &opts)?;
            }
            Ok(t)
        })
        .map_err(to_py)?;
    to_object(py, &table)
}

/// `(z, u)` of the explicit front at `c_nl`, or of the shooting front at
/// `c_min` when `numeric` is set.
#[pyfunction]
#[pyo3(signature = (family, beta, numeric = false, nodes = 4001, z_span = DEFAULT_Z_SPAN))]
fn profile(
    py: Python<'_>,
    family: &PyFamily,
    beta: f64,
    numeric: bool,
    nodes: usize,
    z_span: f64,
) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let fam = valid(family, beta)?;
    let p = py
        .detach(|| {
            if numeric {
                let opts = ShootOptions::default();
                let r = family_minimal_speed(&fam, beta, &opts)?;
                let shot = shoot_once(&family_reaction(&fam, beta)?, r.bracket.1.max(r.c_min), &opts)?;
                numeric_profile(&shot, z_span, nodes)
            } else {
                explicit_profile(&fam, beta, z_span, nodes)
            }
        })
        .map_err(to_py)?;
    Ok((p.c, p.z, p.u))
}

/// Φ certificate of the explicit front at speed `c`.
#[pyfunction]
fn certificate<'py>(py: Python<'py>, family: &PyFamily, beta: f64, c: f64) -> PyResult<Bound<'py, PyAny>> {
    let fam = valid(family, beta)?;
    let opts = SweepOptions::default();
    let cert = explicit_profile(&fam, beta, opts.z_span, opts.profile_nodes)
        .and_then(|p| pushed_certificate(&fam, beta, c, &p, opts.classify_tol))
        .map_err(to_py)?;
    to_object(py, &cert)
}

#[pyfunction]
fn hr_bound<'py>(py: Python<'py>, family: &PyFamily, beta: f64) -> PyResult<Bound<'py, PyAny>> {
    let fam = valid(family, beta)?;
    let ext = fam.hprime_extrema(4001, 1e-12).map_err(to_py)?;
    to_object(py, &hr_bound_nu_family(&fam, beta, &ext).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (family, beta, seed = 0, restarts = 8))]
fn numeric_minmax<'py>(
    py: Python<'py>,
    family: &PyFamily,
    beta: f64,
    seed: u64,
    restarts: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let fam = valid(family, beta)?;
    let opts = MinmaxOptions {
        seed,
        restarts,
        ..MinmaxOptions::default()
    };
    let r = py.detach(|| minmax(&fam, beta, &opts)).map_err(to_py)?;
    to_object(py, &r)
}

/// Direct PDE run; returns the measured speed and the front track.
#[pyfunction]
#[pyo3(signature = (family, beta, t_end = 60.0, dx = 0.1, domain_length = 300.0, x0 = 20.0))]
fn simulate<'py>(
    py: Python<'py>,
    family: &PyFamily,
    beta: f64,
    t_end: f64,
    dx: f64,
    domain_length: f64,
    x0: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let fam = valid(family, beta)?;
    let cfg = SimConfig {
        t_end,
        dx,
        domain_length,
        initial: InitialCondition::Step { x0 },
        ..SimConfig::default()
    };
    let m = py.detach(|| simulate_family(&fam, beta, &cfg)).map_err(to_py)?;
    #[derive(Serialize)]
    struct Out {
        speed: f64,
        fit_residual: f64,
        front_track: Vec<(f64, f64)>,
    }
    to_object(
        py,
        &Out {
            speed: m.speed,
            fit_residual: m.fit_residual,
            front_track: m.front_track,
        },
    )
}

#[pymodule]
fn pyfrontspeed(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFamily>()?;
    m.add("FrontspeedError", m.py().get_type::<FrontspeedError>())?;
    m.add_function(wrap_pyfunction!(minimal_speed, m)?)?;
    m.add_function(wrap_pyfunction!(speeds_at, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(hr_bound, m)?)?;
    m.add_function(wrap_pyfunction!(numeric_minmax, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
