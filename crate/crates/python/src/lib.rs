//! Python bindings. Complex numbers cross as Python `complex`; exponents of q as `(num, den)`
//! pairs. Report objects come back as dicts, with complex fields as `[re, im]` pairs.

use ellhol::affine::{self, CartanPoint, LevelOneRep};
use ellhol::chern::{self, BChInputJson};
use ellhol::elliptic::{self, Pairing, TorusFieldJson};
use ellhol::qseries::{self, QPoint, QSeriesJson};
use ellhol::special::{self, SpinStructure};
use ellhol::transport::{self, Algebra, LoopConnectionJson};
use ellhol::Error;
use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

create_exception!(_ellhol, EllholError, PyValueError);
create_exception!(_ellhol, ZeroModeError, EllholError);
create_exception!(_ellhol, NonConvergentError, EllholError);

fn err(e: Error) -> PyErr {
    match e {
        Error::ZeroMode => ZeroModeError::new_err(e.to_string()),
        Error::NonConvergent(_) => NonConvergentError::new_err(e.to_string()),
        _ => EllholError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    EllholError::new_err(format!("bad JSON: {e}"))
}

/// Serializes through JSON into plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(json_err)?;
    py.import("json")?.call_method1("loads", (s,))
}

fn rep(s: &str) -> PyResult<LevelOneRep> {
    s.parse().map_err(err)
}

fn spin(s: (u8, u8)) -> PyResult<SpinStructure> {
    SpinStructure::new(s.0, s.1).map_err(err)
}

fn pairing(s: &str) -> PyResult<Pairing> {
    match s {
        "flipped" => Ok(Pairing::Flipped),
        "unflipped" => Ok(Pairing::Unflipped),
        other => Err(EllholError::new_err(format!("unknown pairing {other:?}"))),
    }
}

fn rat(num: i64, den: i64) -> PyResult<qseries::Rat> {
    if den == 0 {
        return Err(EllholError::new_err("zero denominator"));
    }
    Ok(qseries::rat(num, den))
}

/// Truncated q-series with rational exponents.
#[pyclass(name = "QSeries", module = "ellhol._ellhol")]
pub struct PyQSeries(qseries::QSeries);

#[pymethods]
impl PyQSeries {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let j: QSeriesJson = serde_json::from_str(s).map_err(json_err)?;
        qseries::QSeries::from_json(&j).map(Self).map_err(err)
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.to_json()).map_err(json_err)
    }
    /// `[(num, den, coeff), ...]` in increasing exponent.
    fn terms(&self) -> Vec<(i64, i64, C64)> {
        self.0.terms().map(|(e, c)| (*e.numer(), *e.denom(), c)).collect()
    }
    #[getter]
    fn trunc(&self) -> (i64, i64) {
        let t = self.0.trunc();
        (*t.numer(), *t.denom())
    }
    fn valuation(&self) -> (i64, i64) {
        let v = self.0.valuation();
        (*v.numer(), *v.denom())
    }
    fn coeff(&self, num: i64, den: i64) -> PyResult<C64> {
        Ok(self.0.coeff(rat(num, den)?))
    }
    /// Multiplies by q^{num/den}.
    fn shift(&self, num: i64, den: i64) -> PyResult<Self> {
        Ok(Self(self.0.shift(rat(num, den)?)))
    }
    fn eval(&self, tau: C64) -> PyResult<C64> {
        Ok(self.0.eval(&QPoint::new(tau).map_err(err)?))
    }
    fn __len__(&self) -> usize {
        self.0.len()
    }
    fn __repr__(&self) -> String {
        let (n, d) = self.trunc();
        format!("QSeries({} terms, O(q^{n}/{d}))", self.0.len())
    }
}

/// Sampled loop A(t) in so(n), u(n) or gl(n).
#[pyclass(name = "LoopConnection", module = "ellhol._ellhol")]
pub struct PyLoopConnection(transport::LoopConnection);

#[pymethods]
impl PyLoopConnection {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let j: LoopConnectionJson = serde_json::from_str(s).map_err(json_err)?;
        transport::LoopConnection::from_json(&j).map(Self).map_err(err)
    }
    /// `samples[k][row][col]`, K uniform samples over one period.
    #[staticmethod]
    fn from_samples(algebra: &str, samples: Vec<Vec<Vec<C64>>>) -> PyResult<Self> {
        let alg: Algebra = algebra.parse().map_err(err)?;
        let mats = samples
            .iter()
            .map(|m| {
                let n = m.len();
                if m.iter().any(|r| r.len() != n) {
                    return Err(EllholError::new_err("samples must be square"));
                }
                Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]))
            })
            .collect::<PyResult<Vec<_>>>()?;
        transport::LoopConnection::new(alg, mats).map(Self).map_err(err)
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.to_json()).map_err(json_err)
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }
    #[getter]
    fn algebra(&self) -> String {
        self.0.algebra().to_string()
    }
    fn __len__(&self) -> usize {
        self.0.len()
    }
    fn scaled(&self, s: f64) -> Self {
        Self(self.0.scaled(s))
    }
    /// Monodromy as a row-major nested list.
    fn transport(&self) -> Vec<Vec<C64>> {
        let h = transport::parallel_transport(&self.0).hol;
        (0..h.nrows()).map(|i| (0..h.ncols()).map(|j| h[(i, j)]).collect()).collect()
    }
    fn aw_check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &transport::aw_check(&self.0).map_err(err)?)
    }
    fn __repr__(&self) -> String {
        format!("LoopConnection({}({}), K={})", self.0.algebra(), self.0.n(), self.0.len())
    }
}

/// Periodic Cartan-valued field on the N x N grid of the torus C / (Z + tau Z).
#[pyclass(name = "TorusField", module = "ellhol._ellhol")]
pub struct PyTorusField(elliptic::TorusField);

#[pymethods]
impl PyTorusField {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let j: TorusFieldJson = serde_json::from_str(s).map_err(json_err)?;
        elliptic::TorusField::from_json(&j).map(Self).map_err(err)
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.to_json()).map_err(json_err)
    }
    #[getter]
    fn tau(&self) -> C64 {
        self.0.tau()
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }
    #[getter]
    fn l(&self) -> usize {
        self.0.l()
    }
    /// Elliptic holonomy in the given level-one representation.
    fn holonomy<'py>(&self, py: Python<'py>, rep_tag: &str) -> PyResult<Bound<'py, PyAny>> {
        let (v, red) = elliptic::elliptic_holonomy_field(rep(rep_tag)?, &self.0).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("value", v.value)?;
        d.set_item("cartan", v.cartan.0.clone())?;
        d.set_item("phase_log", v.phase_log)?;
        d.set_item("character", v.character)?;
        d.set_item("prefactor", v.prefactor)?;
        d.set_item("reduction_residual", red.residual)?;
        Ok(d.into_any())
    }
}

/// Loop with Grassmann-valued curvature and optional B-field.
#[pyclass(name = "BChInput", module = "ellhol._ellhol")]
pub struct PyBChInput(chern::BChInput);

#[pymethods]
impl PyBChInput {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let j: BChInputJson = serde_json::from_str(s).map_err(json_err)?;
        chern::BChInput::from_json(&j).map(Self).map_err(err)
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.to_json()).map_err(json_err)
    }
    fn without_bfield(&self) -> Self {
        Self(self.0.without_bfield())
    }
    /// Bismut-Chern character as `{(i, j, ...): coeff}` over nonzero blades.
    #[pyo3(signature = (grading=None))]
    fn bismut_chern<'py>(&self, py: Python<'py>, grading: Option<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
        let v = chern::bismut_chern(&self.0, grading.as_deref()).map_err(err)?;
        let d = PyDict::new(py);
        for (b, c) in v.parts() {
            d.set_item(pyo3::types::PyTuple::new(py, b.indices())?, c)?;
        }
        Ok(d)
    }
}

#[pyfunction]
fn theta(i: u8, j: u8, z: C64, tau: C64) -> PyResult<C64> {
    special::theta(i, j, z, tau).map_err(err)
}

#[pyfunction]
fn theta_product(i: u8, j: u8, z: C64, tau: C64) -> PyResult<C64> {
    special::theta_product(i, j, z, tau).map_err(err)
}

#[pyfunction]
fn eta(tau: C64) -> PyResult<C64> {
    special::eta(tau).map_err(err)
}

#[pyfunction]
fn g_k(k: usize, tau: C64) -> PyResult<C64> {
    special::g_k(k, tau).map_err(err)
}

#[pyfunction]
fn g2(tau: C64) -> PyResult<C64> {
    special::g2(tau).map_err(err)
}

#[pyfunction]
fn g2_hat(tau: C64) -> PyResult<C64> {
    special::g2_hat(tau).map_err(err)
}

#[pyfunction]
fn char_level_one(rep_tag: &str, z: Vec<C64>, tau: C64) -> PyResult<C64> {
    affine::char_level_one(rep(rep_tag)?, &CartanPoint::new(z), tau).map_err(err)
}

/// Character q-expansion at the Cartan point z, truncated below q^t.
#[pyfunction]
fn char_qexpansion(rep_tag: &str, z: Vec<C64>, t: i64) -> PyResult<PyQSeries> {
    affine::char_qexpansion(rep(rep_tag)?, &CartanPoint::new(z), t).map(PyQSeries).map_err(err)
}

#[pyfunction]
fn modular_anomaly(rep_tag: &str, l: usize) -> PyResult<(i64, i64)> {
    let m = affine::modular_anomaly(rep(rep_tag)?, l).map_err(err)?;
    Ok((*m.numer(), *m.denom()))
}

#[pyfunction]
#[pyo3(signature = (rep_tag, zs, tau, pairing_name="flipped"))]
fn elliptic_aw_check<'py>(
    py: Python<'py>,
    rep_tag: &str,
    zs: Vec<Vec<C64>>,
    tau: C64,
    pairing_name: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let pts: Vec<CartanPoint> = zs.into_iter().map(CartanPoint::new).collect();
    to_py(py, &elliptic::elliptic_aw_check(rep(rep_tag)?, &pts, tau, pairing(pairing_name)?).map_err(err)?)
}

#[pyfunction]
fn zeta_det_torus(z: C64, tau: C64, spin_bits: (u8, u8)) -> PyResult<f64> {
    elliptic::zeta_det_torus(z, tau, spin(spin_bits)?).map_err(err)
}

#[pyfunction]
fn epstein_zeta_det<'py>(py: Python<'py>, z: C64, tau: C64, spin_bits: (u8, u8)) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &elliptic::epstein_zeta_det(z, tau, spin(spin_bits)?).map_err(err)?)
}

#[pyfunction]
fn degeneration_check<'py>(py: Python<'py>, z: C64, taus: Vec<C64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &elliptic::degeneration_check(z, &taus).map_err(err)?)
}

/// Witten-genus localization identity; eta_power defaults to 2l.
#[pyfunction]
#[pyo3(signature = (l, tau, degree=6, eta_power=None))]
fn localization_identity_check<'py>(
    py: Python<'py>,
    l: usize,
    tau: C64,
    degree: usize,
    eta_power: Option<i32>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = eta_power.unwrap_or(2 * l as i32);
    to_py(py, &chern::localization_identity_check(l, tau, degree, p).map_err(err)?)
}

#[pymodule]
fn _ellhol(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", ellhol::VERSION)?;
    m.add("EllholError", py.get_type::<EllholError>())?;
    m.add("ZeroModeError", py.get_type::<ZeroModeError>())?;
    m.add("NonConvergentError", py.get_type::<NonConvergentError>())?;
    m.add_class::<PyQSeries>()?;
    m.add_class::<PyLoopConnection>()?;
    m.add_class::<PyTorusField>()?;
    m.add_class::<PyBChInput>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(theta_product, m)?)?;
    m.add_function(wrap_pyfunction!(eta, m)?)?;
    m.add_function(wrap_pyfunction!(g_k, m)?)?;
    m.add_function(wrap_pyfunction!(g2, m)?)?;
    m.add_function(wrap_pyfunction!(g2_hat, m)?)?;
    m.add_function(wrap_pyfunction!(char_level_one, m)?)?;
    m.add_function(wrap_pyfunction!(char_qexpansion, m)?)?;
    m.add_function(wrap_pyfunction!(modular_anomaly, m)?)?;
    m.add_function(wrap_pyfunction!(elliptic_aw_check, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_det_torus, m)?)?;
    m.add_function(wrap_pyfunction!(epstein_zeta_det, m)?)?;
    m.add_function(wrap_pyfunction!(degeneration_check, m)?)?;
    m.add_function(wrap_pyfunction!(localization_identity_check, m)?)?;
    Ok(())
}
