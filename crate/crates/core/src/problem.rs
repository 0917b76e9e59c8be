//! Description of one forward subdiffusion problem
//! `∂ₜᵅu − ∇·(a∇u) + qu = f` on the unit interval or the unit square.

use crate::error::{Error, Result};
use crate::field::{Func, TimeProfile};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Interval,
    UnitSquare,
}

#[derive(Debug, Clone)]
pub enum Source {
    /// Time-independent source `f(x)`.
    Steady(Func),
    /// Separable source `g(t) psi(x)`.
    Separable { g: TimeProfile, psi: Func },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dirichlet {
    Homogeneous,
    /// `u(0) = a0`, `u(1) = a1` on the interval.
    Constants(f64, f64),
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub domain: Domain,
    pub diffusion: Func,
    pub potential: Func,
    pub source: Source,
    pub initial: Func,
    pub dirichlet: Dirichlet,
    pub t_final: f64,
}

impl ProblemSpec {
    /// Interval problem with `a = 1`, `q = 0`, `f = 0`, homogeneous Dirichlet data.
    pub fn interval(alpha: f64, initial: Func, t_final: f64) -> Self {
        Self {
            alpha,
            domain: Domain::Interval,
            diffusion: Func::Const(1.0),
            potential: Func::Const(0.0),
            source: Source::Steady(Func::Const(0.0)),
            initial,
            dirichlet: Dirichlet::Homogeneous,
            t_final,
        }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn with_potential(mut self, q: Func) -> Self {
        self.potential = q;
        self
    }

    pub fn with_diffusion(mut self, a: Func) -> Self {
        self.diffusion = a;
        self
    }

    pub fn with_dirichlet(mut self, d: Dirichlet) -> Self {
        self.dirichlet = d;
        self
    }

    pub fn on_square(mut self) -> Self {
        self.domain = Domain::UnitSquare;
        self
    }

    pub fn mesh(&self, cells: usize) -> Result<Mesh> {
        match self.domain {
            Domain::Interval => Mesh::interval(cells),
            Domain::UnitSquare => Mesh::square(cells),
        }
    }

    /// Source density at `(x, y, t)`.
    pub fn source_at(&self, x: f64, y: f64, t: f64) -> f64 {
        match &self.source {
            Source::Steady(f) => f.eval(x, y),
            Source::Separable { g, psi } => g.eval(t) * psi.eval(x, y),
        }
    }

    /// Checks the scalar invariants; coefficient signs are checked on a mesh
    /// by the solvers.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Parameter(format!("terminal time must be positive, got {}", self.t_final)));
        }
        if let Dirichlet::Constants(a0, a1) = self.dirichlet {
            if self.domain != Domain::Interval {
                return Err(Error::Parameter("constant Dirichlet values are supported on the interval only".into()));
            }
            if !(a0.is_finite() && a1.is_finite()) {
                return Err(Error::Parameter("Dirichlet values must be finite".into()));
            }
        }
        Ok(())
    }

    /// Affine lift `a0 (1 - x) + a1 x` of the boundary data (zero if homogeneous).
    pub fn lift(&self, x: f64) -> f64 {
        match self.dirichlet {
            Dirichlet::Homogeneous => 0.0,
            Dirichlet::Constants(a0, a1) => a0 * (1.0 - x) + a1 * x,
        }
    }
}
