//! Python bindings: algebras and multivectors, sparsity and kernel
//! emission, and whole-program parsing, checking, evaluation, derivatives,
//! and placement.
//!
//! Exact coefficients are passed as `"num/den"` strings, floats as
//! numbers; results come back the same way.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyModule};

use phg_core::algebra::{
    Algebra as CoreAlgebra, AlgebraRef, Multivector as CoreMultivector, ProductKind, Signature,
};
use phg_core::autodiff;
use phg_core::grade::GradeSet;
use phg_core::kernel;
use phg_core::mesh;
use phg_core::phg::NodeId;
use phg_core::program::{self, CompiledProgram};
use phg_core::scalar::{Mode, Scalar};

fn value_err(msg: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(msg.to_string())
}

fn runtime_err(msg: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(msg.to_string())
}

/// Coefficient accepted from Python: float, int, or exact `num/den` text.
#[derive(FromPyObject)]
enum Coeff {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Coeff {
    fn to_scalar(&self, mode: Mode) -> PyResult<Scalar> {
        Ok(match (self, mode) {
            (Coeff::Float(v), Mode::Float64) => Scalar::F64(*v),
            (Coeff::Int(v), Mode::Float64) => Scalar::F64(*v as f64),
            (Coeff::Int(v), Mode::ExactRational) => Scalar::from_i64(mode, *v),
            (Coeff::Text(t), m) => Scalar::parse(m, t).map_err(value_err)?,
            (Coeff::Float(v), Mode::ExactRational) => {
                return Err(value_err(format!(
                    "exact mode takes `num/den` strings or integers, got float {v}"
                )))
            }
        })
    }
}

fn scalar_to_py(py: Python<'_>, s: &Scalar) -> Py<PyAny> {
    match s {
        Scalar::F64(v) => v.into_pyobject(py).unwrap().into_any().unbind(),
        r @ Scalar::Rational(_) => r.to_string().into_pyobject(py).unwrap().into_any().unbind(),
    }
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> Py<PyAny> {
    match v {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py).unwrap().to_owned().into_any().unbind(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py).unwrap().into_any().unbind()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py).unwrap().into_any().unbind()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py).unwrap().into_any().unbind(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)).unwrap();
            }
            list.into_any().unbind()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)).unwrap();
            }
            dict.into_any().unbind()
        }
    }
}

fn parse_kind(kind: &str) -> PyResult<ProductKind> {
    ProductKind::from_name(kind)
        .ok_or_else(|| value_err(format!("unknown kind `{kind}`; use gp|outer|inner|regressive")))
}

fn mode_of(exact: bool) -> Mode {
    if exact {
        Mode::ExactRational
    } else {
        Mode::Float64
    }
}

/// A Clifford algebra Cl(p,q,r) with its generated Cayley table.
#[pyclass(name = "Algebra", module = "phgpy")]
struct PyAlgebra {
    inner: AlgebraRef,
}

#[pymethods]
impl PyAlgebra {
    #[new]
    fn new(p: usize, q: usize, r: usize) -> PyResult<Self> {
        let inner = CoreAlgebra::new(Signature::new(p, q, r)).map_err(value_err)?;
        Ok(PyAlgebra { inner })
    }

    /// Generator count d = p + q + r.
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn blade_count(&self) -> usize {
        self.inner.blade_count()
    }

    /// Blade names in canonical order.
    fn blades(&self) -> Vec<String> {
        self.inner
            .blades()
            .iter()
            .map(|b| self.inner.blade_name(*b))
            .collect()
    }

    /// Build a multivector from {blade_name: coefficient}.
    #[pyo3(signature = (coeffs, exact = false))]
    fn multivector(&self, coeffs: BTreeMap<String, Coeff>, exact: bool) -> PyResult<PyMultivector> {
        let mode = mode_of(exact);
        let mut pairs = Vec::new();
        for (name, c) in &coeffs {
            let blade = self
                .inner
                .blade_by_name(name)
                .ok_or_else(|| value_err(format!("unknown blade `{name}`")))?;
            pairs.push((blade, c.to_scalar(mode)?));
        }
        let mv = CoreMultivector::from_coeffs(self.inner.clone(), mode, pairs).map_err(value_err)?;
        Ok(PyMultivector { inner: mv })
    }

    /// Basis blade by name, e.g. `e01`.
    #[pyo3(signature = (name, exact = false))]
    fn basis(&self, name: &str, exact: bool) -> PyResult<PyMultivector> {
        let blade = self
            .inner
            .blade_by_name(name)
            .ok_or_else(|| value_err(format!("unknown blade `{name}`")))?;
        let mv = CoreMultivector::basis(self.inner.clone(), mode_of(exact), blade).map_err(value_err)?;
        Ok(PyMultivector { inner: mv })
    }

    /// Homogeneous point e0 + x e1 + y e2 + z e3 (requires r = 1).
    #[pyo3(signature = (*coords, exact = false))]
    fn point(&self, coords: Vec<Coeff>, exact: bool) -> PyResult<PyMultivector> {
        let mode = mode_of(exact);
        if self.inner.signature().r != 1 {
            return Err(value_err("point() needs an algebra with one degenerate generator"));
        }
        let scalars: PyResult<Vec<Scalar>> = coords.iter().map(|c| c.to_scalar(mode)).collect();
        let mv = mesh::pga_point(&self.inner, &scalars?).map_err(value_err)?;
        Ok(PyMultivector { inner: mv })
    }

    fn __repr__(&self) -> String {
        self.inner.signature().to_string()
    }
}

/// A sparse multivector bound to one algebra and numeric mode.
#[pyclass(name = "Multivector", module = "phgpy", from_py_object)]
#[derive(Clone)]
struct PyMultivector {
    inner: CoreMultivector,
}

impl PyMultivector {
    fn binary(
        &self,
        other: &PyMultivector,
        f: impl Fn(&CoreMultivector, &CoreMultivector) -> Result<CoreMultivector, phg_core::AlgebraError>,
    ) -> PyResult<PyMultivector> {
        Ok(PyMultivector {
            inner: f(&self.inner, &other.inner).map_err(value_err)?,
        })
    }
}

#[pymethods]
impl PyMultivector {
    /// {blade_name: coefficient}; exact coefficients come back as strings.
    fn coeffs(&self, py: Python<'_>) -> Py<PyAny> {
        let dict = PyDict::new(py);
        let alg = self.inner.algebra();
        for (b, c) in self.inner.coeffs() {
            dict.set_item(alg.blade_name(b), scalar_to_py(py, c)).unwrap();
        }
        dict.into_any().unbind()
    }

    fn grades(&self) -> Vec<usize> {
        self.inner.grades()
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    fn gp(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.binary(other, |a, b| a.gp(b))
    }

    fn outer(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.binary(other, |a, b| a.outer(b))
    }

    fn inner(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.binary(other, |a, b| a.inner(b))
    }

    fn regressive(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.binary(other, |a, b| a.regressive(b))
    }

    /// self x reverse(self) applied to `x`.
    fn sandwich(&self, x: &PyMultivector) -> PyResult<PyMultivector> {
        Ok(PyMultivector {
            inner: CoreMultivector::sandwich(&self.inner, &x.inner).map_err(value_err)?,
        })
    }

    fn reverse(&self) -> PyMultivector {
        PyMultivector {
            inner: self.inner.reverse(),
        }
    }

    fn grade_project(&self, k: usize) -> PyResult<PyMultivector> {
        Ok(PyMultivector {
            inner: self.inner.grade_project(k).map_err(value_err)?,
        })
    }

    /// Metric norm as a float; `norm_squared()` keeps the exact value.
    fn norm(&self) -> f64 {
        self.inner.norm().value
    }

    fn norm_squared(&self, py: Python<'_>) -> Py<PyAny> {
        scalar_to_py(py, &self.inner.norm().squared)
    }

    fn __add__(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.binary(other, |a, b| a.add(b))
    }

    fn __sub__(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.binary(other, |a, b| a.sub(b))
    }

    /// `*` is the geometric product; `^` the outer; `&` the regressive.
    fn __mul__(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.gp(other)
    }

    fn __xor__(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.outer(other)
    }

    fn __and__(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        self.regressive(other)
    }

    fn __neg__(&self) -> PyMultivector {
        PyMultivector {
            inner: self.inner.negate(),
        }
    }

    fn __richcmp__(&self, other: &PyMultivector, op: pyo3::basic::CompareOp) -> PyResult<bool> {
        match op {
            pyo3::basic::CompareOp::Eq => Ok(self.inner == other.inner),
            pyo3::basic::CompareOp::Ne => Ok(self.inner != other.inner),
            _ => Err(value_err("multivectors are not ordered")),
        }
    }

    fn __repr__(&self) -> String {
        self.inner.to_string()
    }
}

/// Exact incidence predicate (rational mode only): the regressive product
/// vanishes identically.
#[pyfunction]
fn incidence(x: &PyMultivector, y: &PyMultivector) -> PyResult<bool> {
    mesh::incidence(&x.inner, &y.inner).map_err(value_err)
}

/// Side-of-plane orientation: "on" | "positive" | "negative".
#[pyfunction]
fn orientation(point: &PyMultivector, plane: &PyMultivector) -> PyResult<&'static str> {
    Ok(match mesh::orientation(&point.inner, &plane.inner).map_err(value_err)? {
        mesh::Orientation::On => "on",
        mesh::Orientation::Positive => "positive",
        mesh::Orientation::Negative => "negative",
    })
}

/// Measure of a k-simplex join (length, area, volume).
#[pyfunction]
fn simplex_content(py: Python<'_>, join: &PyMultivector, order: usize) -> PyResult<Py<PyAny>> {
    let s = mesh::simplex_content(&join.inner, order).map_err(value_err)?;
    Ok(scalar_to_py(py, &s))
}

/// Sparsity profile of one operation at a grade restriction, as a dict.
#[pyfunction]
fn sparsity_profile(
    py: Python<'_>,
    p: usize,
    q: usize,
    r: usize,
    kind: &str,
    grade_p: usize,
    grade_q: usize,
) -> PyResult<Py<PyAny>> {
    let alg = CoreAlgebra::new(Signature::new(p, q, r)).map_err(value_err)?;
    let profile =
        kernel::sparsity_profile(&alg, parse_kind(kind)?, grade_p, grade_q).map_err(value_err)?;
    let v = serde_json::to_value(&profile).map_err(runtime_err)?;
    Ok(json_to_py(py, &v))
}

/// Fraction of zero entries in the 2^d x 2^d x 2^d product tensor.
#[pyfunction]
fn tensor_sparsity(p: usize, q: usize, r: usize, kind: &str) -> PyResult<f64> {
    let alg = CoreAlgebra::new(Signature::new(p, q, r)).map_err(value_err)?;
    Ok(kernel::tensor_sparsity(&alg, parse_kind(kind)?))
}

/// Specialized straight-line kernel text for a product at a grade
/// restriction.
#[pyfunction]
fn emit_kernel(
    p: usize,
    q: usize,
    r: usize,
    kind: &str,
    grades_p: Vec<usize>,
    grades_q: Vec<usize>,
) -> PyResult<String> {
    let alg = CoreAlgebra::new(Signature::new(p, q, r)).map_err(value_err)?;
    let kir = kernel::emit_kernel(
        &alg,
        parse_kind(kind)?,
        &GradeSet::from_grades(grades_p),
        &GradeSet::from_grades(grades_q),
    )
    .map_err(value_err)?;
    Ok(kir.to_string())
}

/// Fused k-simplex join kernel text.
#[pyfunction]
fn emit_join_kernel(p: usize, q: usize, r: usize, order: usize) -> PyResult<String> {
    let alg = CoreAlgebra::new(Signature::new(p, q, r)).map_err(value_err)?;
    let kir = kernel::emit_join_kernel(&alg, order).map_err(value_err)?;
    Ok(kir.to_string())
}

/// A parsed and validated program in the textual format.
#[pyclass(name = "Program", module = "phgpy")]
struct PyProgram {
    inner: CompiledProgram,
}

impl PyProgram {
    fn bind_values(
        &self,
        values: BTreeMap<String, Vec<Coeff>>,
        mode: Mode,
    ) -> PyResult<BTreeMap<NodeId, CoreMultivector>> {
        let alg = self
            .inner
            .algebra
            .as_ref()
            .ok_or_else(|| value_err("program declares no algebra"))?;
        let mut out = BTreeMap::new();
        for (name, coeffs) in values {
            let id = self
                .inner
                .node_id(&name)
                .ok_or_else(|| value_err(format!("unknown node `{name}`")))?;
            if coeffs.len() != alg.blade_count() {
                return Err(value_err(format!(
                    "`{name}` needs {} coefficients in canonical blade order",
                    alg.blade_count()
                )));
            }
            let mut pairs = Vec::new();
            for (i, c) in coeffs.iter().enumerate() {
                let s = c.to_scalar(mode)?;
                if !s.is_zero() {
                    pairs.push((alg.blades()[i], s));
                }
            }
            out.insert(
                id,
                CoreMultivector::from_coeffs(alg.clone(), mode, pairs).map_err(value_err)?,
            );
        }
        Ok(out)
    }

    fn values_to_py(
        &self,
        py: Python<'_>,
        values: &BTreeMap<NodeId, CoreMultivector>,
    ) -> Py<PyAny> {
        let dict = PyDict::new(py);
        for (id, mv) in values {
            let list = PyList::empty(py);
            for s in mv.to_dense() {
                list.append(scalar_to_py(py, &s)).unwrap();
            }
            dict.set_item(self.inner.node_name(*id), list).unwrap();
        }
        dict.into_any().unbind()
    }

    fn resolve_outputs(&self, outputs: Option<Vec<String>>) -> PyResult<Option<Vec<NodeId>>> {
        match outputs {
            None => Ok(None),
            Some(names) => {
                let mut ids = Vec::new();
                for n in names {
                    ids.push(
                        self.inner
                            .node_id(&n)
                            .ok_or_else(|| value_err(format!("unknown node `{n}`")))?,
                    );
                }
                Ok(Some(ids))
            }
        }
    }
}

#[pymethods]
impl PyProgram {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let inner = program::load_program(text).map_err(value_err)?;
        Ok(PyProgram { inner })
    }

    fn node_names(&self) -> Vec<String> {
        self.inner.phg.nodes().iter().map(|n| n.name.clone()).collect()
    }

    /// Run the full static pipeline; returns the diagnostic report as a
    /// dict with an `ok` flag.
    fn check(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let out = program::check(&self.inner);
        let mut v = serde_json::to_value(&out.report).map_err(runtime_err)?;
        v["ok"] = serde_json::json!(!out.report.has_errors());
        Ok(json_to_py(py, &v))
    }

    /// Inferred grade set per node after saturation (sorted grade lists;
    /// "zero" for provably-zero values, None for unknown).
    fn grades(&self, py: Python<'_>) -> Py<PyAny> {
        let report = self.inner.phg.saturate();
        let dict = PyDict::new(py);
        for node in self.inner.phg.nodes() {
            let gs = report.grades(node.id);
            let val: Py<PyAny> = if gs.is_unknown() {
                py.None()
            } else if gs.is_structural_zero() {
                "zero".into_pyobject(py).unwrap().into_any().unbind()
            } else {
                gs.grades().into_pyobject(py).unwrap().into_any().unbind()
            };
            dict.set_item(&node.name, val).unwrap();
        }
        dict.into_any().unbind()
    }

    /// Evaluate; `inputs` maps node names to dense coefficient lists.
    #[pyo3(signature = (inputs, outputs = None, exact = false, kernels = false))]
    fn eval(
        &self,
        py: Python<'_>,
        inputs: BTreeMap<String, Vec<Coeff>>,
        outputs: Option<Vec<String>>,
        exact: bool,
        kernels: bool,
    ) -> PyResult<Py<PyAny>> {
        let mode = mode_of(exact);
        let bound = self.bind_values(inputs, mode)?;
        let outs = self.resolve_outputs(outputs)?;
        let report = self.inner.phg.saturate();
        let opts = autodiff::EvalOptions {
            backend: if kernels {
                autodiff::Backend::Kernels
            } else {
                autodiff::Backend::Dense
            },
        };
        let (values, _) =
            autodiff::eval_with_stats(&self.inner.phg, &report, &bound, outs.as_deref(), opts)
                .map_err(runtime_err)?;
        Ok(self.values_to_py(py, &values))
    }

    /// Forward-mode directional derivative; tangents for the listed inputs,
    /// zero elsewhere.
    #[pyo3(signature = (inputs, direction, outputs = None, exact = false))]
    fn diff(
        &self,
        py: Python<'_>,
        inputs: BTreeMap<String, Vec<Coeff>>,
        direction: BTreeMap<String, Vec<Coeff>>,
        outputs: Option<Vec<String>>,
        exact: bool,
    ) -> PyResult<Py<PyAny>> {
        let mode = mode_of(exact);
        let bound = self.bind_values(inputs, mode)?;
        let dir = self.bind_values(direction, mode)?;
        let outs = self.resolve_outputs(outputs)?;
        let report = self.inner.phg.saturate();
        let tangents = autodiff::directional_derivative(
            &self.inner.phg,
            &report,
            &bound,
            &dir,
            outs.as_deref(),
        )
        .map_err(runtime_err)?;
        Ok(self.values_to_py(py, &tangents))
    }

    /// Co-location feasibility and (when feasible) the greedy tile plan.
    #[pyo3(signature = (target = None))]
    fn place(&self, py: Python<'_>, target: Option<BTreeMap<String, u32>>) -> PyResult<Py<PyAny>> {
        let targets: Vec<phg_core::place::TargetModel> = match target {
            Some(t) => {
                let get = |k: &str| -> PyResult<u32> {
                    t.get(k)
                        .copied()
                        .ok_or_else(|| value_err(format!("target needs `{k}`")))
                };
                vec![phg_core::place::TargetModel::new(
                    "target",
                    get("rows")? as usize,
                    get("cols")? as usize,
                    get("tile_kb")?,
                    get("dma_channels")?,
                )]
            }
            None => self
                .inner
                .file
                .targets
                .iter()
                .map(|t| t.model.clone())
                .collect(),
        };
        if targets.is_empty() {
            return Err(value_err("no targets declared and none passed"));
        }
        let matrix = phg_core::place::check_feasibility(&self.inner.phg, &targets);
        let plan = if matrix.all_feasible() {
            Some(phg_core::place::assign(&self.inner.phg, &targets[0]).map_err(runtime_err)?)
        } else {
            None
        };
        let plan_json = plan
            .as_ref()
            .map(|p| program::plan_to_json(&self.inner, p))
            .unwrap_or(serde_json::Value::Null);
        let v = serde_json::json!({
            "feasibility": program::matrix_to_json(&self.inner, &matrix),
            "plan": plan_json,
        });
        Ok(json_to_py(py, &v))
    }

    /// Program text in canonical form.
    fn serialize(&self) -> String {
        program::serialize_program(&self.inner.file)
    }

    fn __repr__(&self) -> String {
        format!(
            "Program({} nodes, {} hyperedges)",
            self.inner.phg.node_count(),
            self.inner.phg.edge_count()
        )
    }
}

#[pymodule]
fn phgpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAlgebra>()?;
    m.add_class::<PyMultivector>()?;
    m.add_class::<PyProgram>()?;
    m.add_function(wrap_pyfunction!(incidence, m)?)?;
    m.add_function(wrap_pyfunction!(orientation, m)?)?;
    m.add_function(wrap_pyfunction!(simplex_content, m)?)?;
    m.add_function(wrap_pyfunction!(sparsity_profile, m)?)?;
    m.add_function(wrap_pyfunction!(tensor_sparsity, m)?)?;
    m.add_function(wrap_pyfunction!(emit_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(emit_join_kernel, m)?)?;
    Ok(())
}
