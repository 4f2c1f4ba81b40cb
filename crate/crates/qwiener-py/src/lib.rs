//! Python bindings.
//!
//! Symbols, operators and factorizations cross the boundary in the same JSON
//! layout the command line reads and writes: pass a dict or a JSON string and
//! get plain dicts back.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use qwiener::circle::{self, InverseOptions};
use qwiener::continuous::factor_continuous;
use qwiener::factorization::{factor_discrete, verify_factorization, FactorOptions, FactorizationResult};
use qwiener::rational::RationalQMatrix;
use qwiener::realization::{self, assemble_realization, CanonicalOptions, Realization};
use qwiener::series::LaurentQSeries;
use qwiener::solvers::{self, ConvolutionOperator, DifferenceOperator};
use qwiener::{Error, QMatrix};

create_exception!(qwiener, QWienerError, PyException, "Failure inside the numerical core.");
create_exception!(qwiener, ObstructionError, QWienerError, "The input has no factorization or no inverse.");

fn to_py(e: Error) -> PyErr {
    if e.is_obstruction() {
        ObstructionError::new_err(e.to_string())
    } else {
        QWienerError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Reads a dict or JSON string.
fn read_value(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text = if let Ok(s) = obj.cast::<PyString>() {
        s.to_str()?.to_owned()
    } else {
        let json = PyModule::import(obj.py(), "json")?;
        json.call_method1("dumps", (obj,))?.extract::<String>()?
    };
    serde_json::from_str(&text).map_err(json_err)
}

fn read<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    serde_json::from_value(read_value(obj)?).map_err(json_err)
}

fn to_dict<'py>(py: Python<'py>, v: impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(&v).map_err(json_err)?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

enum Symbol {
    Series(LaurentQSeries),
    Rational(RationalQMatrix),
    Realization(Realization),
}

fn read_symbol(obj: &Bound<'_, PyAny>) -> PyResult<Symbol> {
    let v = read_value(obj)?;
    let has = |k: &str| v.get(k).is_some();
    let sym = if has("terms") {
        Symbol::Series(serde_json::from_value(v).map_err(json_err)?)
    } else if has("num") {
        Symbol::Rational(serde_json::from_value(v).map_err(json_err)?)
    } else if has("A") {
        Symbol::Realization(serde_json::from_value(v).map_err(json_err)?)
    } else {
        return Err(PyValueError::new_err("unrecognized symbol format"));
    };
    Ok(sym)
}

fn read_series(obj: &Bound<'_, PyAny>) -> PyResult<LaurentQSeries> {
    match read_symbol(obj)? {
        Symbol::Series(s) => Ok(s),
        _ => Err(PyValueError::new_err("expected a discrete symbol {\"n\", \"terms\"}")),
    }
}

/// A real quaternion `w + x i + y j + z k`.
#[pyclass(name = "Quaternion", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyQuaternion(qwiener::Quaternion);

#[pymethods]
impl PyQuaternion {
    #[new]
    #[pyo3(signature = (w=0.0, x=0.0, y=0.0, z=0.0))]
    fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        PyQuaternion(qwiener::Quaternion::new(w, x, y, z))
    }

    #[getter]
    fn w(&self) -> f64 {
        self.0.w
    }
    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }
    #[getter]
    fn y(&self) -> f64 {
        self.0.y
    }
    #[getter]
    fn z(&self) -> f64 {
        self.0.z
    }

    fn components(&self) -> (f64, f64, f64, f64) {
        let [w, x, y, z] = self.0.to_array();
        (w, x, y, z)
    }

    fn conj(&self) -> Self {
        PyQuaternion(self.0.conj())
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn inv(&self) -> PyResult<Self> {
        self.0.inv().map(PyQuaternion).map_err(to_py)
    }

    fn __add__(&self, o: &Self) -> Self {
        PyQuaternion(self.0 + o.0)
    }

    fn __sub__(&self, o: &Self) -> Self {
        PyQuaternion(self.0 - o.0)
    }

    fn __mul__(&self, o: &Bound<'_, PyAny>) -> PyResult<Self> {
        if let Ok(q) = o.extract::<PyQuaternion>() {
            Ok(PyQuaternion(self.0 * q.0))
        } else {
            Ok(PyQuaternion(self.0 * o.extract::<f64>()?))
        }
    }

    fn __rmul__(&self, s: f64) -> Self {
        PyQuaternion(s * self.0)
    }

    fn __neg__(&self) -> Self {
        PyQuaternion(-self.0)
    }

    fn __eq__(&self, o: &Self) -> bool {
        self.0 == o.0
    }

    fn __repr__(&self) -> String {
        let [w, x, y, z] = self.0.to_array();
        format!("Quaternion({w}, {x}, {y}, {z})")
    }
}

/// Orthonormal imaginary units `i, j` fixing the complex slice used internally.
#[pyclass(name = "SliceFrame", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySliceFrame(qwiener::SliceFrame);

#[pymethods]
impl PySliceFrame {
    #[new]
    #[pyo3(signature = (i=None, j=None, orthonormalize=false))]
    fn new(i: Option<PyQuaternion>, j: Option<PyQuaternion>, orthonormalize: bool) -> PyResult<Self> {
        match (i, j) {
            (None, None) => Ok(PySliceFrame(qwiener::SliceFrame::default())),
            (Some(i), Some(j)) if orthonormalize => qwiener::SliceFrame::orthonormalized(i.0, j.0).map(PySliceFrame).map_err(to_py),
            (Some(i), Some(j)) => qwiener::SliceFrame::new(i.0, j.0).map(PySliceFrame).map_err(to_py),
            _ => Err(PyValueError::new_err("give both i and j or neither")),
        }
    }

    #[getter]
    fn i(&self) -> PyQuaternion {
        PyQuaternion(self.0.i())
    }
    #[getter]
    fn j(&self) -> PyQuaternion {
        PyQuaternion(self.0.j())
    }
    #[getter]
    fn k(&self) -> PyQuaternion {
        PyQuaternion(self.0.k())
    }

    /// `q = a + b j` with `a, b` in the slice of `i`.
    fn split(&self, q: PyQuaternion) -> (Complex64, Complex64) {
        self.0.split(q.0)
    }

    fn __repr__(&self) -> String {
        format!("SliceFrame(i={}, j={})", self.0.i(), self.0.j())
    }
}

/// Samples of a quaternion function at `t = 1/s, 2/s, ..., T`.
#[pyclass(name = "GridFunction", from_py_object)]
#[derive(Clone)]
struct PyGridFunction(solvers::GridFunction);

#[pymethods]
impl PyGridFunction {
    #[new]
    fn new(horizon: usize, s: usize, samples: Vec<(f64, f64, f64, f64)>) -> PyResult<Self> {
        let samples = samples.into_iter().map(|(w, x, y, z)| qwiener::Quaternion::new(w, x, y, z)).collect();
        solvers::GridFunction::new(horizon, s, samples).map(PyGridFunction).map_err(to_py)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        solvers::GridFunction::read_csv(text.as_bytes()).map(PyGridFunction).map_err(to_py)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.0.write_csv(&mut buf).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| QWienerError::new_err(e.to_string()))
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.0.horizon
    }
    #[getter]
    fn s(&self) -> usize {
        self.0.s
    }
    #[getter]
    fn samples(&self) -> Vec<(f64, f64, f64, f64)> {
        self.0.samples.iter().map(|q| (q.w, q.x, q.y, q.z)).collect()
    }

    fn times(&self) -> Vec<f64> {
        (0..self.0.len()).map(|i| self.0.t(i)).collect()
    }

    fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("GridFunction(T={}, s={})", self.0.horizon, self.0.s)
    }
}

fn frame_of(f: Option<PySliceFrame>) -> qwiener::SliceFrame {
    f.map(|f| f.0).unwrap_or_default()
}

/// Invertibility test on the unit circle.
#[pyfunction]
#[pyo3(signature = (symbol, frame=None, grid=64, tol=1e-8))]
fn is_invertible<'py>(symbol: &Bound<'py, PyAny>, frame: Option<PySliceFrame>, grid: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let f = read_series(symbol)?;
    let cert = circle::is_invertible(&f, &frame_of(frame), grid, tol).map_err(to_py)?;
    to_dict(symbol.py(), cert)
}

/// Star-inverse of a discrete symbol together with `||F * F^{-1} - I||`.
#[pyfunction]
#[pyo3(signature = (symbol, frame=None, tol=1e-10, trunc=None))]
fn star_inverse<'py>(symbol: &Bound<'py, PyAny>, frame: Option<PySliceFrame>, tol: f64, trunc: Option<i64>) -> PyResult<Bound<'py, PyAny>> {
    let f = read_series(symbol)?;
    let inv = circle::star_inverse(&f, &frame_of(frame), InverseOptions { trunc, grid: 0, tol }).map_err(to_py)?;
    let residual = f.star_mul(&inv).and_then(|p| p.sub(&LaurentQSeries::identity(f.n()))).map_err(to_py)?.norm();
    to_dict(symbol.py(), json!({ "inverse": inv, "residual": residual }))
}

#[pyfunction]
#[pyo3(signature = (symbol, frame=None, grid=64))]
fn winding_index(symbol: &Bound<'_, PyAny>, frame: Option<PySliceFrame>, grid: usize) -> PyResult<i64> {
    circle::winding_index(&read_series(symbol)?, &frame_of(frame), grid).map_err(to_py)
}

/// Wiener-Hopf factorization of a discrete or rational symbol.
#[pyfunction]
#[pyo3(signature = (symbol, frame=None, tol=1e-8))]
fn factorize<'py>(symbol: &Bound<'py, PyAny>, frame: Option<PySliceFrame>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let frame = frame_of(frame);
    let opts = FactorOptions { max_residual: tol, ..FactorOptions::default() };
    let out = match read_symbol(symbol)? {
        Symbol::Series(f) => json!({ "kind": "discrete", "factorization": factor_discrete(&f, &frame, &opts).map_err(to_py)? }),
        Symbol::Rational(f) => json!({ "kind": "continuous", "factorization": factor_continuous(&f, &frame, &opts).map_err(to_py)? }),
        Symbol::Realization(_) => return Err(PyValueError::new_err("factorize takes a series or rational symbol")),
    };
    to_dict(symbol.py(), out)
}

/// Checks a discrete factorization against its symbol.
#[pyfunction]
#[pyo3(signature = (symbol, factorization, frame=None, tol=1e-8))]
fn verify<'py>(
    symbol: &Bound<'py, PyAny>,
    factorization: &Bound<'py, PyAny>,
    frame: Option<PySliceFrame>,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let f = read_series(symbol)?;
    let mut v = read_value(factorization)?;
    if let Some(inner) = v.get_mut("factorization") {
        v = inner.take();
    }
    let r: FactorizationResult = serde_json::from_value(v).map_err(json_err)?;
    let rep = verify_factorization(&f, &r, &frame_of(frame), tol).map_err(to_py)?;
    to_dict(symbol.py(), rep)
}

/// State-space realization `D + C (p G - A)^{-1} B` of a rational symbol.
#[pyfunction]
fn realize<'py>(symbol: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let f: RationalQMatrix = read(symbol)?;
    let d = if f.is_proper() {
        f.num().coeff_or_zero(f.den().degree() as i64).scale(1.0 / f.den().leading())
    } else {
        QMatrix::identity(f.n())
    };
    to_dict(symbol.py(), assemble_realization(&f, &d).map_err(to_py)?)
}

/// Canonical factorization from a realization or a rational symbol equal to `I` at infinity.
#[pyfunction]
#[pyo3(signature = (symbol, frame=None, tol=1e-8))]
fn canonical_factorize<'py>(symbol: &Bound<'py, PyAny>, frame: Option<PySliceFrame>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = match read_symbol(symbol)? {
        Symbol::Realization(r) => r,
        Symbol::Rational(f) => assemble_realization(&f, &QMatrix::identity(f.n())).map_err(to_py)?,
        Symbol::Series(_) => return Err(PyValueError::new_err("canonical_factorize takes a realization or rational symbol")),
    };
    let opts = CanonicalOptions { tol, ..CanonicalOptions::default() };
    let c = realization::canonical_factorize(&r, &frame_of(frame), &opts).map_err(to_py)?;
    to_dict(symbol.py(), json!({ "realization": r, "factorization": c }))
}

fn solve_result<'py>(py: Python<'py>, rep: solvers::SolveReport) -> PyResult<(Bound<'py, PyAny>, Option<PyGridFunction>)> {
    let solution = rep.solution.clone().map(PyGridFunction);
    Ok((to_dict(py, rep)?, solution))
}

/// Solves `sum a_n psi(t - n) = g` on the half-line; returns `(report, solution)`.
#[pyfunction]
#[pyo3(signature = (op, rhs, frame=None, tol=1e-8))]
fn solve_difference<'py>(
    op: &Bound<'py, PyAny>,
    rhs: PyGridFunction,
    frame: Option<PySliceFrame>,
    tol: f64,
) -> PyResult<(Bound<'py, PyAny>, Option<PyGridFunction>)> {
    let a: DifferenceOperator = read(op)?;
    let rep = solvers::solve_difference(&a, &rhs.0, &frame_of(frame), tol).map_err(to_py)?;
    solve_result(op.py(), rep)
}

/// Solves `c psi + int k(t - s) psi(s) ds = g` on the half-line; returns `(report, solution)`.
#[pyfunction]
#[pyo3(signature = (op, rhs, frame=None, tol=1e-6))]
fn solve_convolution<'py>(
    op: &Bound<'py, PyAny>,
    rhs: PyGridFunction,
    frame: Option<PySliceFrame>,
    tol: f64,
) -> PyResult<(Bound<'py, PyAny>, Option<PyGridFunction>)> {
    let b: ConvolutionOperator = read(op)?;
    let rep = solvers::solve_convolution(&b, &rhs.0, &frame_of(frame), tol).map_err(to_py)?;
    solve_result(op.py(), rep)
}

/// Applies a convolution operator to a grid function.
#[pyfunction]
fn apply_convolution(op: &Bound<'_, PyAny>, phi: PyGridFunction) -> PyResult<PyGridFunction> {
    let b: ConvolutionOperator = read(op)?;
    Ok(PyGridFunction(solvers::apply_convolution(&b, &phi.0)))
}

/// Applies a difference operator to a grid function.
#[pyfunction]
fn apply_difference(op: &Bound<'_, PyAny>, phi: PyGridFunction) -> PyResult<PyGridFunction> {
    let a: DifferenceOperator = read(op)?;
    Ok(PyGridFunction(solvers::apply_difference(&a, &phi.0)))
}

#[pymodule]
#[pyo3(name = "qwiener")]
fn qwiener_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QWienerError", m.py().get_type::<QWienerError>())?;
    m.add("ObstructionError", m.py().get_type::<ObstructionError>())?;
    m.add_class::<PyQuaternion>()?;
    m.add_class::<PySliceFrame>()?;
    m.add_class::<PyGridFunction>()?;
    m.add_function(wrap_pyfunction!(is_invertible, m)?)?;
    m.add_function(wrap_pyfunction!(star_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(winding_index, m)?)?;
    m.add_function(wrap_pyfunction!(factorize, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_factorize, m)?)?;
    m.add_function(wrap_pyfunction!(solve_difference, m)?)?;
    m.add_function(wrap_pyfunction!(solve_convolution, m)?)?;
    m.add_function(wrap_pyfunction!(apply_convolution, m)?)?;
    m.add_function(wrap_pyfunction!(apply_difference, m)?)?;
    Ok(())
}
