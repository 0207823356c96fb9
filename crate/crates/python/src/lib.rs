//! Python bindings: expressions, chart geometries, curvature, the
//! metrisability obstruction, parallel transport and holonomy.

use std::collections::HashMap;
use std::fmt::Display;

use projprolong_core::geometry::{max_abs_over, ChartGeometry, CurvaturePack};
use projprolong_core::projective::einstein_deviation_from;
use projprolong_core::tractor::{
    metrisability_obstruction, BundleConnection, ConnectionKind, ContextConnection, FlatSkewProlongation,
    ProjectiveContext,
};
use projprolong_core::transport::{holonomy_dimension, random_loops, transport, ConnectionMatrices, Curve, DEFAULT_STEPS};
use projprolong_core::{parse, TensorField};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(projprolong, ProjprolongError, PyValueError);

fn err<E: Display>(e: E) -> PyErr {
    ProjprolongError::new_err(e.to_string())
}

/// A parsed expression in the coordinates `x0 .. x{dim-1}`.
#[pyclass(name = "Expr", frozen, module = "projprolong")]
struct PyExpr {
    inner: projprolong_core::Expr,
    dim: usize,
}

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str, dim: usize) -> PyResult<Self> {
        Ok(PyExpr { inner: parse(text, dim).map_err(err)?, dim })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, point: Vec<f64>) -> PyResult<f64> {
        if point.len() != self.dim {
            return Err(err(format!("point has {} coordinates, expected {}", point.len(), self.dim)));
        }
        self.inner.eval::<f64>(&point).map_err(err)
    }

    /// Partial derivative with respect to `x{coord}`.
    fn diff(&self, coord: usize) -> PyResult<PyExpr> {
        if coord >= self.dim {
            return Err(err(format!("coordinate {coord} out of range for dimension {}", self.dim)));
        }
        Ok(PyExpr { inner: self.inner.diff(coord), dim: self.dim })
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?}, {})", self.inner.to_string(), self.dim)
    }
}

/// A metric on a coordinate chart.
#[pyclass(name = "Geometry", frozen, module = "projprolong")]
struct PyGeometry {
    inner: ChartGeometry,
}

impl PyGeometry {
    fn context(&self) -> PyResult<ProjectiveContext> {
        ProjectiveContext::from_geometry(&self.inner).map_err(err)
    }

    fn connection(&self, bundle: &str, probe: &[f64]) -> PyResult<Box<dyn BundleConnection>> {
        if bundle == "skew" {
            let skew = FlatSkewProlongation::new(self.inner.levi_civita(), &[probe.to_vec()]).map_err(err)?;
            return Ok(Box::new(skew));
        }
        let kind = ConnectionKind::parse(bundle).ok_or_else(|| err(format!("unknown bundle {bundle:?}")))?;
        Ok(Box::new(ContextConnection::new(self.context()?, kind).map_err(err)?))
    }

    fn check_point(&self, point: &[f64]) -> PyResult<()> {
        if point.len() != self.inner.dim() {
            return Err(err(format!("point has {} coordinates, expected {}", point.len(), self.inner.dim())));
        }
        Ok(())
    }
}

fn flat_values(field: &TensorField, point: &[f64]) -> PyResult<Vec<f64>> {
    Ok(field.eval::<f64>(point).map_err(err)?.components().to_vec())
}

#[pymethods]
impl PyGeometry {
    /// `metric` is an n x n grid of expression strings in `x0 .. x{n-1}`.
    #[new]
    fn new(metric: Vec<Vec<String>>) -> PyResult<Self> {
        Ok(PyGeometry { inner: ChartGeometry::parse(&metric).map_err(err)? })
    }

    #[staticmethod]
    fn flat(n: usize) -> Self {
        PyGeometry { inner: ChartGeometry::flat(n) }
    }

    /// The round sphere in stereographic coordinates.
    #[staticmethod]
    fn round_sphere(n: usize) -> Self {
        PyGeometry { inner: ChartGeometry::round_sphere(n) }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Riemann, Ricci, scalar, Schouten, Weyl and Cotton at `point`, each as
    /// a flat row-major list (upper indices first).
    fn curvature(&self, point: Vec<f64>) -> PyResult<HashMap<String, Vec<f64>>> {
        self.check_point(&point)?;
        let (_, pack) = CurvaturePack::derive(&self.inner).map_err(err)?;
        let scalar = pack.scalar.clone().expect("derived from a metric");
        let mut out = HashMap::new();
        for (name, f) in [
            ("riemann", &pack.riemann),
            ("ricci", &pack.ricci),
            ("scalar", &scalar),
            ("schouten", &pack.schouten),
            ("weyl", &pack.weyl),
            ("cotton", &pack.cotton),
        ] {
            out.insert(name.to_string(), flat_values(f, &point)?);
        }
        Ok(out)
    }

    /// Largest component of the metrisability obstruction of the inverse
    /// metric over `points`. Zero exactly when the metric is Einstein.
    fn obstruction_max(&self, points: Vec<Vec<f64>>) -> PyResult<f64> {
        let ctx = self.context()?;
        let (v, s) = metrisability_obstruction(&ctx, self.inner.inverse()).map_err(err)?;
        max_abs_over(&[&v, &s], &points).map_err(err)
    }

    /// Largest component of the trace-free Ricci tensor over `points`.
    fn einstein_deviation_max(&self, points: Vec<Vec<f64>>) -> PyResult<f64> {
        let ctx = self.context()?;
        max_abs_over(&[&einstein_deviation_from(&self.inner, ctx.pack())], &points).map_err(err)
    }

    /// Parallel transport of `initial` along the straight line `start -> end`.
    #[pyo3(signature = (bundle, start, end, initial, steps = DEFAULT_STEPS))]
    fn transport(&self, bundle: &str, start: Vec<f64>, end: Vec<f64>, initial: Vec<f64>, steps: usize) -> PyResult<Vec<f64>> {
        self.check_point(&start)?;
        self.check_point(&end)?;
        let conn = self.connection(bundle, &start)?;
        let mats = ConnectionMatrices::new(conn.as_ref()).map_err(err)?;
        let curve = Curve::line(&start, &end).map_err(err)?;
        transport(&mats, &curve, &initial, steps).map_err(err)
    }

    /// Parallel transport around a circle through `base` in the `plane`.
    #[pyo3(signature = (bundle, base, plane, radius, initial, steps = DEFAULT_STEPS))]
    fn transport_loop(
        &self,
        bundle: &str,
        base: Vec<f64>,
        plane: (usize, usize),
        radius: f64,
        initial: Vec<f64>,
        steps: usize,
    ) -> PyResult<Vec<f64>> {
        self.check_point(&base)?;
        let conn = self.connection(bundle, &base)?;
        let mats = ConnectionMatrices::new(conn.as_ref()).map_err(err)?;
        let curve = Curve::circle(&base, plane, radius).map_err(err)?;
        transport(&mats, &curve, &initial, steps).map_err(err)
    }

    /// Dimension of the subspace fixed by the holonomy of seeded random
    /// loops through `base` inside `bounds`.
    #[pyo3(signature = (bundle, base, bounds, loops = 5, seed = 0, steps = DEFAULT_STEPS))]
    fn holonomy<'py>(
        &self,
        py: Python<'py>,
        bundle: &str,
        base: Vec<f64>,
        bounds: Vec<(f64, f64)>,
        loops: usize,
        seed: u64,
        steps: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        self.check_point(&base)?;
        let conn = self.connection(bundle, &base)?;
        let mats = ConnectionMatrices::new(conn.as_ref()).map_err(err)?;
        let curves = random_loops(&base, &bounds, loops, seed).map_err(err)?;
        let rep = py.detach(|| holonomy_dimension(&mats, &curves, steps)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("rank", rep.rank)?;
        d.set_item("loops", rep.loops)?;
        d.set_item("fixed_dim", rep.fixed_dim)?;
        d.set_item("singular_values", rep.singular_values)?;
        d.set_item("seed", seed)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Geometry(dim={})", self.inner.dim())
    }
}

/// Names accepted by the `bundle` arguments.
#[pyfunction]
fn bundles() -> Vec<&'static str> {
    ConnectionKind::ALL.iter().map(|k| k.name()).collect()
}

#[pymodule]
#[pyo3(name = "projprolong")]
fn projprolong_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyGeometry>()?;
    m.add_function(wrap_pyfunction!(bundles, m)?)?;
    m.add("ProjprolongError", m.py().get_type::<ProjprolongError>())?;
    Ok(())
}
