//! Spatial functions: nodal P1 fields and the coefficient inputs of a problem.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Nodal values of a continuous piecewise linear function on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh: Mesh,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::Shape { expected: mesh.n_nodes(), got: values.len() });
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self { mesh, values: vec![0.0; mesh.n_nodes()] }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(mesh: Mesh, f: F) -> Self {
        let values = (0..mesh.n_nodes())
            .map(|k| {
                let (x, y) = mesh.coords(k);
                f(x, y)
            })
            .collect();
        Self { mesh, values }
    }

    /// Field with the given interior values and zero boundary values.
    pub fn from_interior(mesh: Mesh, interior: &[f64]) -> Result<Self> {
        Self::from_interior_with_boundary(mesh, interior, &Field::zeros(mesh))
    }

    /// Field with the given interior values and the boundary values of `boundary`.
    pub fn from_interior_with_boundary(mesh: Mesh, interior: &[f64], boundary: &Field) -> Result<Self> {
        if interior.len() != mesh.n_interior() {
            return Err(Error::Shape { expected: mesh.n_interior(), got: interior.len() });
        }
        let mut values = boundary.values.clone();
        for (k, &node) in mesh.interior_nodes().iter().enumerate() {
            values[node] = interior[k];
        }
        Ok(Self { mesh, values })
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior(&self) -> Vec<f64> {
        self.mesh.interior_nodes().iter().map(|&k| self.values[k]).collect()
    }

    /// P1 interpolation at an arbitrary point of the domain.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (nodes, w) = self.mesh.locate(x, y);
        nodes.iter().zip(w).map(|(&k, wk)| if wk == 0.0 { 0.0 } else { wk * self.values[k] }).sum()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Field { mesh: self.mesh, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        Ok(Field { mesh: self.mesh, values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect() })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Samples this field on another mesh by P1 interpolation.
    pub fn resample(&self, target: Mesh) -> Field {
        Field::from_fn(target, |x, y| self.eval(x, y))
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.mesh != other.mesh {
            return Err(Error::Shape { expected: self.mesh.n_nodes(), got: other.mesh.n_nodes() });
        }
        Ok(())
    }
}

type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A coefficient or datum of the model: constant, closed-form, or nodal.
#[derive(Clone)]
pub enum Func {
    Const(f64),
    Analytic(SpaceFn),
    Nodal(Field),
}

impl Func {
    pub fn analytic<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Func::Analytic(Arc::new(f))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Func::Const(c) => *c,
            Func::Analytic(f) => f(x, y),
            Func::Nodal(field) => field.eval(x, y),
        }
    }

    /// Nodal interpolant on `mesh`.
    pub fn sample(&self, mesh: Mesh) -> Field {
        match self {
            Func::Nodal(field) if field.mesh() == mesh => field.clone(),
            _ => Field::from_fn(mesh, |x, y| self.eval(x, y)),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Func::Const(c) => *c == 0.0,
            Func::Nodal(field) => field.values().iter().all(|&v| v == 0.0),
            Func::Analytic(_) => false,
        }
    }
}

impl fmt::Debug for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Func::Const(c) => write!(f, "Const({c})"),
            Func::Analytic(_) => write!(f, "Analytic(..)"),
            Func::Nodal(field) => write!(f, "Nodal({:?}, {} values)", field.mesh(), field.values().len()),
        }
    }
}

impl From<Field> for Func {
    fn from(field: Field) -> Self {
        Func::Nodal(field)
    }
}

/// Time profile `g(t)` of a separable source `g(t) psi(x)`.
#[derive(Clone)]
pub enum TimeProfile {
    Constant(f64),
    Custom(TimeFn),
}

impl TimeProfile {
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        TimeProfile::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::Custom(g) => g(t),
        }
    }
}

impl fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeProfile::Constant(c) => write!(f, "Constant({c})"),
            TimeProfile::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}
