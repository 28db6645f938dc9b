//! Python module `optmech`: rectangles, solved mechanisms, certificates and
//! the linear-marginal extension. Structured results come back as dicts with
//! the same field names as the JSON output of the CLI.

use optmech::oracle;
use optmech::{Error, Mechanism, MenuItem, Rectangle};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde_json::Value;

fn to_pyerr(e: Error) -> PyErr {
    match e {
        Error::SolverDiverged { .. } | Error::NoConvergence(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn serde_to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

#[pyclass(name = "Rectangle", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRectangle {
    inner: Rectangle,
}

#[pymethods]
impl PyRectangle {
    #[new]
    fn new(c1: f64, c2: f64, b1: f64, b2: f64) -> PyResult<Self> {
        Ok(PyRectangle { inner: Rectangle::new(c1, c2, b1, b2).map_err(to_pyerr)? })
    }
    #[getter]
    fn c1(&self) -> f64 {
        self.inner.c1
    }
    #[getter]
    fn c2(&self) -> f64 {
        self.inner.c2
    }
    #[getter]
    fn b1(&self) -> f64 {
        self.inner.b1
    }
    #[getter]
    fn b2(&self) -> f64 {
        self.inner.b2
    }
    fn swapped(&self) -> Self {
        PyRectangle { inner: self.inner.swapped() }
    }
    fn scaled(&self, factor: f64) -> Self {
        PyRectangle { inner: self.inner.scaled(factor) }
    }
    /// Name of the phase region.
    fn region(&self) -> String {
        format!("{:?}", optmech::classify(&self.inner))
    }
    fn __repr__(&self) -> String {
        let r = &self.inner;
        format!("Rectangle(c1={}, c2={}, b1={}, b2={})", r.c1, r.c2, r.b1, r.b2)
    }
}

#[pyclass(name = "Mechanism", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMechanism {
    inner: Mechanism,
}

#[pymethods]
impl PyMechanism {
    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }
    #[getter]
    fn revenue(&self) -> f64 {
        self.inner.revenue
    }
    /// Items as `(q1, q2, price)`.
    #[getter]
    fn menu(&self) -> Vec<(f64, f64, f64)> {
        self.inner.menu.iter().map(|it| (it.q1, it.q2, it.t)).collect()
    }
    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serde_to_py(py, &self.inner.params)
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyMechanism { inner })
    }
    fn __repr__(&self) -> String {
        format!("Mechanism(kind={}, revenue={}, items={})", self.inner.kind, self.inner.revenue, self.inner.menu.len())
    }
}

fn menu_items(menu: Vec<(f64, f64, f64)>) -> PyResult<Vec<MenuItem>> {
    menu.into_iter().map(|(q1, q2, t)| MenuItem::new(q1, q2, t).map_err(to_pyerr)).collect()
}

#[pyfunction]
fn solve(rect: &PyRectangle) -> PyResult<PyMechanism> {
    Ok(PyMechanism { inner: optmech::solve(&rect.inner).map_err(to_pyerr)? })
}

#[pyfunction]
fn classify(rect: &PyRectangle) -> String {
    rect.region()
}

/// Expected payment of an arbitrary menu of `(q1, q2, price)` items.
#[pyfunction]
fn expected_revenue(menu: Vec<(f64, f64, f64)>, rect: &PyRectangle) -> PyResult<f64> {
    Ok(optmech::expected_revenue(&menu_items(menu)?, &rect.inner))
}

#[pyfunction]
fn certificate_check<'py>(py: Python<'py>, mech: &PyMechanism, rect: &PyRectangle) -> PyResult<Bound<'py, PyAny>> {
    let rep = oracle::certificate_check(&mech.inner, &rect.inner).map_err(to_pyerr)?;
    serde_to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (rect, coarse = 16, rounds = 4))]
fn brute_force<'py>(py: Python<'py>, rect: &PyRectangle, coarse: usize, rounds: usize) -> PyResult<Bound<'py, PyAny>> {
    let bf = py.detach(|| oracle::brute_force_menu_search(&rect.inner, coarse, rounds));
    let v = serde_json::json!({ "menu": bf.menu, "revenue": bf.revenue, "evaluations": bf.evaluations });
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (mech, rect, coarse = 16, rounds = 4))]
fn verify<'py>(py: Python<'py>, mech: &PyMechanism, rect: &PyRectangle, coarse: usize, rounds: usize) -> PyResult<Bound<'py, PyAny>> {
    let (rep, _) = py
        .detach(|| oracle::verify(&mech.inner, &rect.inner, coarse, rounds))
        .map_err(to_pyerr)?;
    serde_to_py(py, &rep)
}

/// Parameters and revenue for linear marginals on `[c, c+1]`.
#[pyfunction]
fn solve_linear<'py>(py: Python<'py>, c: f64) -> PyResult<Bound<'py, PyAny>> {
    let p = optmech::solve_linear(c).map_err(to_pyerr)?;
    let v = serde_json::json!({ "params": p, "revenue": optmech::linear_revenue(&p) });
    to_py(py, &v)
}

#[pymodule]
#[pyo3(name = "optmech")]
fn optmech_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRectangle>()?;
    m.add_class::<PyMechanism>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(expected_revenue, m)?)?;
    m.add_function(wrap_pyfunction!(certificate_check, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linear, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_values_convert() {
        Python::initialize();
        Python::attach(|py| {
            let v = serde_json::json!({ "a": [1, 2.5, null, true, "x"] });
            let o = to_py(py, &v).unwrap();
            assert_eq!(o.repr().unwrap().to_string(), "{'a': [1, 2.5, None, True, 'x']}");
        });
    }

    #[test]
    fn errors_map_to_python_types() {
        Python::initialize();
        Python::attach(|py| {
            assert!(to_pyerr(Error::NonFinite).is_instance_of::<PyValueError>(py));
            assert!(to_pyerr(Error::NoConvergence("x".into())).is_instance_of::<PyRuntimeError>(py));
        });
    }
}
