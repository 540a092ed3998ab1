//! Python module `diamond_gap`.
//!
//! Structured results (parameters, reports) come back as plain dicts built
//! from the same JSON the CLI writes.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use diamond_gap::bounds::{self, check_fiedler as fiedler, check_prop1 as prop1};
use diamond_gap::channel::{self as ch, DiamondChannel};
use diamond_gap::linalg::{Matrix, PsdMatrix};
use diamond_gap::protocol::GammaForm;
use diamond_gap::Error;

create_exception!(diamond_gap, NotApplicableError, PyValueError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NotApplicable { .. } => NotApplicableError::new_err(e.to_string()),
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py)
}

fn gamma_form(s: &str) -> PyResult<GammaForm> {
    s.parse().map_err(PyValueError::new_err)
}

fn to_dict<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Two-relay diamond channel with four n x n real matrices.
#[pyclass(name = "Channel", module = "diamond_gap")]
struct Channel {
    inner: DiamondChannel,
}

#[pymethods]
impl Channel {
    #[new]
    fn new(
        h01: Vec<Vec<f64>>,
        h02: Vec<Vec<f64>>,
        h13: Vec<Vec<f64>>,
        h23: Vec<Vec<f64>>,
    ) -> PyResult<Self> {
        let inner = DiamondChannel::new(matrix(h01)?, matrix(h02)?, matrix(h13)?, matrix(h23)?)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Gaussian ensemble member `(n, seed, scale)`.
    #[staticmethod]
    #[pyo3(signature = (n, seed, scale = 1.0))]
    fn random(n: usize, seed: u64, scale: f64) -> PyResult<Self> {
        if n == 0 || !(scale > 0.0 && scale.is_finite()) {
            return Err(PyValueError::new_err("need n >= 1 and scale > 0"));
        }
        Ok(Self {
            inner: ch::random_diamond(n, seed, scale),
        })
    }

    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(PyValueError::new_err("need n >= 1"));
        }
        Ok(Self {
            inner: DiamondChannel::identity(n),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ch::load_channel(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        ch::save_channel(&self.inner, path).map_err(to_py)
    }

    fn to_json(&self) -> String {
        ch::channel_to_json(&self.inner)
    }

    fn swap_relays(&self) -> Self {
        Self {
            inner: self.inner.swap_relays(),
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn h01(&self) -> Vec<Vec<f64>> {
        self.inner.h01.to_rows()
    }

    #[getter]
    fn h02(&self) -> Vec<Vec<f64>> {
        self.inner.h02.to_rows()
    }

    #[getter]
    fn h13(&self) -> Vec<Vec<f64>> {
        self.inner.h13.to_rows()
    }

    #[getter]
    fn h23(&self) -> Vec<Vec<f64>> {
        self.inner.h23.to_rows()
    }

    fn __repr__(&self) -> String {
        format!("Channel(n={})", self.inner.n)
    }
}

/// Capacity-achieving covariance of `H` under `tr(Q) <= power`:
/// returns `(capacity_bits, covariance)`.
#[pyfunction]
fn waterfill(h: Vec<Vec<f64>>, power: f64) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let r = diamond_gap::capacity::waterfill(&matrix(h)?, power).map_err(to_py)?;
    Ok((r.capacity_bits, r.covariance.matrix().to_rows()))
}

#[pyfunction]
fn derive_params<'py>(py: Python<'py>, channel: &Channel) -> PyResult<Bound<'py, PyAny>> {
    let p = diamond_gap::derive_params(&channel.inner).map_err(to_py)?;
    to_dict(py, &p)
}

#[pyfunction]
#[pyo3(signature = (channel, gamma_form = "corrected"))]
fn achievable_rate<'py>(
    py: Python<'py>,
    channel: &Channel,
    gamma_form: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let r = diamond_gap::achievable_rate(&channel.inner, self::gamma_form(gamma_form)?)
        .map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (channel, gamma_form = "corrected"))]
fn gap_report<'py>(
    py: Python<'py>,
    channel: &Channel,
    gamma_form: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let r = bounds::gap_report(&channel.inner, self::gamma_form(gamma_form)?).map_err(to_py)?;
    to_dict(py, &r)
}

/// Full single-channel report, as written by `diamond-gap analyze`.
#[pyfunction]
#[pyo3(signature = (channel, gamma_form = "corrected"))]
fn analyze<'py>(
    py: Python<'py>,
    channel: &Channel,
    gamma_form: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let a = diamond_gap::analyze(&channel.inner, self::gamma_form(gamma_form)?).map_err(to_py)?;
    to_dict(py, &a)
}

#[pyfunction]
fn check_fiedler<'py>(
    py: Python<'py>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let a = PsdMatrix::new(matrix(a)?).map_err(to_py)?;
    let b = PsdMatrix::new(matrix(b)?).map_err(to_py)?;
    to_dict(py, &fiedler(&a, &b).map_err(to_py)?)
}

#[pyfunction]
fn check_prop1<'py>(py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyAny>> {
    if n == 0 {
        return Err(PyValueError::new_err("need n >= 1"));
    }
    to_dict(py, &prop1(n))
}

#[pyfunction]
fn theorem_bound(n: usize) -> f64 {
    bounds::theorem_bound(n)
}

#[pymodule]
#[pyo3(name = "diamond_gap")]
fn diamond_gap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Channel>()?;
    m.add("NotApplicableError", m.py().get_type::<NotApplicableError>())?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(derive_params, m)?)?;
    m.add_function(wrap_pyfunction!(achievable_rate, m)?)?;
    m.add_function(wrap_pyfunction!(gap_report, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(check_fiedler, m)?)?;
    m.add_function(wrap_pyfunction!(check_prop1, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_bound, m)?)?;
    Ok(())
}
