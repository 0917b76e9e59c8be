//! Galerkin P1 finite elements in space with the L1 scheme for the Caputo
//! derivative on a uniform time grid.
//!
//! One step of the scheme reads
//! `(s M + K) uⁿ = s M (uⁿ⁻¹ − Σ_{j≥1} b_j (uⁿ⁻ʲ − uⁿ⁻ʲ⁻¹)) + Fⁿ`
//! with `s = 1 / (Γ(2−α) τ^α)`, `b_j = (j+1)^{1−α} − j^{1−α}`, `M` the mass
//! matrix and `K = S_a + M_q`. Dirichlet data are imposed through the affine
//! lift `a0 (1 − x) + a1 x`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::field::{Field, Func};
use crate::linalg::{BandCholesky, BandedSym};
use crate::mesh::Mesh;
use crate::problem::{Dirichlet, ProblemSpec, Source};

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub t_final: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, t_final: f64) -> Result<Self> {
        if n_steps < 1 {
            return Err(Error::Parameter("time grid needs at least one step".into()));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Parameter(format!("terminal time must be positive, got {t_final}")));
        }
        Ok(Self { n_steps, t_final })
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_final * n as f64 / self.n_steps as f64
    }
}

/// Weights of the L1 approximation of the Caputo derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Weights {
    pub alpha: f64,
    pub b: Vec<f64>,
    pub scale: f64,
}

impl L1Weights {
    pub fn new(alpha: f64, tg: &TimeGrid) -> Self {
        let p = 1.0 - alpha;
        let b = (0..=tg.n_steps)
            .map(|j| {
                let j = j as f64;
                (j + 1.0).powf(p) - j.powf(p)
            })
            .collect();
        let scale = 1.0 / (gamma(2.0 - alpha) * tg.tau().powf(alpha));
        Self { alpha, b, scale }
    }
}

// Reference-element quadrature in barycentric coordinates, weights summing to 1.
fn quadrature(mesh: Mesh) -> Vec<([f64; 3], f64)> {
    match mesh {
        Mesh::Interval { .. } => {
            let d = 0.5 * (0.6f64).sqrt();
            vec![
                ([0.5 + d, 0.5 - d, 0.0], 5.0 / 18.0),
                ([0.5, 0.5, 0.0], 8.0 / 18.0),
                ([0.5 - d, 0.5 + d, 0.0], 5.0 / 18.0),
            ]
        }
        Mesh::Square { .. } => {
            let (a1, w1) = (0.445_948_490_915_965, 0.223_381_589_678_011);
            let (a2, w2) = (0.091_576_213_509_771, 0.109_951_743_655_322);
            let mut out = Vec::with_capacity(6);
            for (a, w) in [(a1, w1), (a2, w2)] {
                let b = 1.0 - 2.0 * a;
                out.push(([a, a, b], w));
                out.push(([a, b, a], w));
                out.push(([b, a, a], w));
            }
            out
        }
    }
}

fn nodes_of(mesh: Mesh, el: &[usize; 3]) -> usize {
    if mesh.dim() == 1 {
        let _ = el;
        2
    } else {
        3
    }
}

// Value of a coefficient at a quadrature point.
fn coef_at(func: &Func, mesh: Mesh, el: &[usize; 3], lam: &[f64; 3], x: f64, y: f64) -> f64 {
    match func {
        Func::Const(c) => *c,
        Func::Nodal(field) if field.mesh() == mesh => {
            let v = field.values();
            (0..nodes_of(mesh, el)).map(|k| lam[k] * v[el[k]]).sum()
        }
        _ => func.eval(x, y),
    }
}

fn point(mesh: Mesh, el: &[usize; 3], lam: &[f64; 3]) -> (f64, f64) {
    let (mut x, mut y) = (0.0, 0.0);
    for k in 0..nodes_of(mesh, el) {
        let (cx, cy) = mesh.coords(el[k]);
        x += lam[k] * cx;
        y += lam[k] * cy;
    }
    (x, y)
}

// Gradients of the barycentric basis on an element.
fn gradients(mesh: Mesh, el: &[usize; 3]) -> [(f64, f64); 3] {
    if mesh.dim() == 1 {
        let h = mesh.h();
        return [(-1.0 / h, 0.0), (1.0 / h, 0.0), (0.0, 0.0)];
    }
    let p: Vec<(f64, f64)> = el.iter().map(|&k| mesh.coords(k)).collect();
    let area2 = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
    [
        ((p[1].1 - p[2].1) / area2, (p[2].0 - p[1].0) / area2),
        ((p[2].1 - p[0].1) / area2, (p[0].0 - p[2].0) / area2),
        ((p[0].1 - p[1].1) / area2, (p[1].0 - p[0].0) / area2),
    ]
}

fn assemble_matrix<F>(mesh: Mesh, local: F) -> BandedSym
where
    F: Fn(&[usize; 3]) -> [[f64; 3]; 3] + Sync,
{
    let elements = mesh.elements();
    let locals: Vec<[[f64; 3]; 3]> = elements.par_iter().map(&local).collect();
    let mut m = BandedSym::zeros(mesh.n_nodes(), mesh.bandwidth());
    let nl = if mesh.dim() == 1 { 2 } else { 3 };
    for (el, loc) in elements.iter().zip(&locals) {
        for a in 0..nl {
            for b in 0..=a {
                let (i, j) = (el[a], el[b]);
                if i == j {
                    m.add(i, j, loc[a][b]);
                } else {
                    m.add(i.max(j), i.min(j), loc[a][b]);
                }
            }
        }
    }
    m
}

/// Mass matrix `∫ w φᵢ φⱼ` over all nodes.
pub fn mass_matrix(mesh: Mesh, weight: &Func) -> BandedSym {
    let quad = quadrature(mesh);
    let meas = mesh.element_measure();
    let nl = if mesh.dim() == 1 { 2 } else { 3 };
    assemble_matrix(mesh, |el| {
        let mut loc = [[0.0; 3]; 3];
        for (lam, w) in &quad {
            let (x, y) = point(mesh, el, lam);
            let c = coef_at(weight, mesh, el, lam, x, y) * w * meas;
            for a in 0..nl {
                for b in 0..nl {
                    loc[a][b] += c * lam[a] * lam[b];
                }
            }
        }
        loc
    })
}

/// Stiffness matrix `∫ a ∇φᵢ·∇φⱼ` over all nodes.
pub fn stiffness_matrix(mesh: Mesh, a: &Func) -> BandedSym {
    let quad = quadrature(mesh);
    let meas = mesh.element_measure();
    let nl = if mesh.dim() == 1 { 2 } else { 3 };
    assemble_matrix(mesh, |el| {
        let g = gradients(mesh, el);
        let mut abar = 0.0;
        for (lam, w) in &quad {
            let (x, y) = point(mesh, el, lam);
            abar += w * coef_at(a, mesh, el, lam, x, y);
        }
        let mut loc = [[0.0; 3]; 3];
        for i in 0..nl {
            for j in 0..nl {
                loc[i][j] = abar * meas * (g[i].0 * g[j].0 + g[i].1 * g[j].1);
            }
        }
        loc
    })
}

/// Load vector `∫ f φᵢ` over all nodes.
pub fn load_vector(mesh: Mesh, f: &Func) -> Vec<f64> {
    let quad = quadrature(mesh);
    let meas = mesh.element_measure();
    let nl = if mesh.dim() == 1 { 2 } else { 3 };
    let mut out = vec![0.0; mesh.n_nodes()];
    for el in mesh.elements() {
        for (lam, w) in &quad {
            let (x, y) = point(mesh, &el, lam);
            let c = coef_at(f, mesh, &el, lam, x, y) * w * meas;
            for a in 0..nl {
                out[el[a]] += c * lam[a];
            }
        }
    }
    out
}

/// Restriction of a full-node matrix to the interior nodes.
pub fn restrict_interior(mesh: Mesh, full: &BandedSym) -> BandedSym {
    let interior = mesh.interior_nodes();
    let bw = mesh.interior_bandwidth();
    let mut out = BandedSym::zeros(interior.len(), bw);
    for (i, &ki) in interior.iter().enumerate() {
        for j in i.saturating_sub(bw)..=i {
            let v = full.get(ki, interior[j]);
            if v != 0.0 {
                out.add(i, j, v);
            }
        }
    }
    out
}

/// `L²` norm of a nodal field through the mass matrix.
pub fn l2_norm(field: &Field) -> f64 {
    let m = mass_matrix(field.mesh(), &Func::Const(1.0));
    m.dot(field.values(), field.values()).max(0.0).sqrt()
}

/// `L²` distance of two fields; the coarser one is interpolated onto the finer mesh.
pub fn l2_distance(a: &Field, b: &Field) -> f64 {
    let (fine, coarse) = if a.mesh().n_nodes() >= b.mesh().n_nodes() { (a, b) } else { (b, a) };
    let c = coarse.resample(fine.mesh());
    l2_norm(&fine.sub(&c).expect("same mesh after resampling"))
}

/// Spatial operators of one problem on one mesh.
#[derive(Debug, Clone)]
pub struct FemOperator {
    pub mesh: Mesh,
    pub alpha: f64,
    /// Full-node mass matrix.
    pub mass_full: BandedSym,
    /// Full-node `S_a + M_q`.
    pub stiff_full: BandedSym,
    pub mass: BandedSym,
    pub stiff: BandedSym,
    /// Nodal values of the Dirichlet lift.
    pub lift: Vec<f64>,
}

impl FemOperator {
    pub fn new(spec: &ProblemSpec, mesh: Mesh) -> Result<Self> {
        spec.validate()?;
        check_domain(spec, mesh)?;
        let a_nodes = spec.diffusion.sample(mesh);
        if let Some(v) = a_nodes.values().iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::Parameter(format!("diffusion coefficient must be positive, found {v}")));
        }
        let q_nodes = spec.potential.sample(mesh);
        if let Some(v) = q_nodes.values().iter().find(|&&v| v < 0.0) {
            return Err(Error::Domain(format!("potential must be nonnegative, found {v}")));
        }
        let mass_full = mass_matrix(mesh, &Func::Const(1.0));
        let mut stiff_full = stiffness_matrix(mesh, &spec.diffusion);
        if !spec.potential.is_zero() {
            stiff_full = stiff_full.combine(1.0, &mass_matrix(mesh, &spec.potential), 1.0);
        }
        let lift = Field::from_fn(mesh, |x, _| spec.lift(x)).into_values();
        Ok(Self {
            mesh,
            alpha: spec.alpha,
            mass: restrict_interior(mesh, &mass_full),
            stiff: restrict_interior(mesh, &stiff_full),
            mass_full,
            stiff_full,
            lift,
        })
    }

    /// Same operator with a different potential.
    pub fn with_potential(&self, spec: &ProblemSpec, q: &Func) -> Result<Self> {
        let mut s = spec.clone();
        s.potential = q.clone();
        FemOperator::new(&s, self.mesh)
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_interior()
    }

    /// Interior restriction of a full-node vector.
    pub fn interior(&self, full: &[f64]) -> Vec<f64> {
        self.mesh.interior_nodes().iter().map(|&k| full[k]).collect()
    }

    /// Interior part of `−K ℓ`, the load generated by the lift.
    pub fn lift_load(&self) -> Vec<f64> {
        if self.lift.iter().all(|&v| v == 0.0) {
            return vec![0.0; self.n_dofs()];
        }
        let kl = self.stiff_full.mul_vec(&self.lift);
        self.interior(&kl).into_iter().map(|v| -v).collect()
    }

    /// Full nodal vector `w + ℓ` from interior values `w`.
    pub fn full_from_interior(&self, w: &[f64]) -> Vec<f64> {
        let mut out = self.lift.clone();
        for (k, &node) in self.mesh.interior_nodes().iter().enumerate() {
            out[node] += w[k];
        }
        out
    }

    pub fn stepper(&self, tg: &TimeGrid) -> Result<Stepper> {
        let weights = L1Weights::new(self.alpha, tg);
        let system = self.stiff.combine(1.0, &self.mass, weights.scale);
        let chol = system.cholesky().map_err(|e| Error::Numerical(format!("time-stepping matrix: {e}")))?;
        Ok(Stepper { chol, mass: self.mass.clone(), weights, grid: *tg })
    }
}

fn check_domain(spec: &ProblemSpec, mesh: Mesh) -> Result<()> {
    use crate::problem::Domain;
    let ok = matches!(
        (spec.domain, mesh),
        (Domain::Interval, Mesh::Interval { .. }) | (Domain::UnitSquare, Mesh::Square { .. })
    );
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter(format!("mesh {mesh:?} does not match domain {:?}", spec.domain)))
    }
}

/// Factorized L1 time stepper for one operator and one time grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    chol: BandCholesky,
    mass: BandedSym,
    pub weights: L1Weights,
    pub grid: TimeGrid,
}

/// Output of [`Stepper::march`].
#[derive(Debug, Clone)]
pub struct March {
    /// States `u⁰ … uᴺ` (interior values, one column per right-hand side).
    pub states: Vec<DMatrix<f64>>,
}

impl March {
    pub fn last(&self) -> &DMatrix<f64> {
        self.states.last().expect("march keeps at least the initial state")
    }
}

impl Stepper {
    /// Runs the L1 scheme for every column of `init` at once. `load(n, t, rhs)`
    /// adds the step-`n` load to `rhs` (same shape as `init`).
    pub fn march<L>(&self, init: DMatrix<f64>, mut load: L) -> March
    where
        L: FnMut(usize, f64, &mut DMatrix<f64>),
    {
        let n_steps = self.grid.n_steps;
        let (rows, cols) = init.shape();
        let b = &self.weights.b;
        let s = self.weights.scale;
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut diffs: Vec<DMatrix<f64>> = Vec::with_capacity(n_steps);
        states.push(init);
        let mut hist = DMatrix::<f64>::zeros(rows, cols);
        let mut rhs = DMatrix::<f64>::zeros(rows, cols);
        for n in 1..=n_steps {
            hist.copy_from(&states[n - 1]);
            {
                let hs = hist.as_mut_slice();
                for j in 1..n {
                    let d = diffs[n - j - 1].as_slice();
                    let bj = b[j];
                    for (h, dv) in hs.iter_mut().zip(d) {
                        *h -= bj * dv;
                    }
                }
            }
            rhs.fill(0.0);
            load(n, self.grid.time(n), &mut rhs);
            let hs = hist.as_slice();
            let rs = rhs.as_mut_slice();
            let mut mh = vec![0.0; rows];
            for c in 0..cols {
                let col = &hs[c * rows..(c + 1) * rows];
                self.mass.mul_vec_into(col, &mut mh);
                let rc = &mut rs[c * rows..(c + 1) * rows];
                for (r, m) in rc.iter_mut().zip(&mh) {
                    *r += s * m;
                }
                self.chol.solve_in_place(rc);
            }
            diffs.push(&rhs - &states[n - 1]);
            states.push(rhs.clone());
        }
        March { states }
    }

    /// Single right-hand-side convenience wrapper around [`Stepper::march`].
    pub fn march_vec<L>(&self, init: &[f64], mut load: L) -> Vec<Vec<f64>>
    where
        L: FnMut(usize, f64, &mut [f64]),
    {
        let m = DMatrix::from_column_slice(init.len(), 1, init);
        let out = self.march(m, |n, t, rhs| load(n, t, rhs.as_mut_slice()));
        out.states.into_iter().map(|s| s.as_slice().to_vec()).collect()
    }
}

/// Fully discrete trajectory: one full-node field per time level.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<Field>,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.states.last().expect("nonempty trajectory")
    }
}

/// Interior load vectors of a problem: constant part and separable part.
pub(crate) struct Loads {
    pub fixed: Vec<f64>,
    pub profile: Option<(crate::field::TimeProfile, Vec<f64>)>,
}

pub(crate) fn problem_loads(spec: &ProblemSpec, op: &FemOperator) -> Loads {
    let mesh = op.mesh;
    let mut fixed = op.lift_load();
    let mut profile = None;
    match &spec.source {
        Source::Steady(f) => {
            if !f.is_zero() {
                let l = op.interior(&load_vector(mesh, f));
                fixed.iter_mut().zip(l).for_each(|(a, b)| *a += b);
            }
        }
        Source::Separable { g, psi } => {
            profile = Some((g.clone(), op.interior(&load_vector(mesh, psi))));
        }
    }
    Loads { fixed, profile }
}

/// Solves the forward problem with the L1 scheme and returns the whole trajectory.
pub fn solve_fem(spec: &ProblemSpec, mesh: Mesh, tg: &TimeGrid) -> Result<Trajectory> {
    let op = FemOperator::new(spec, mesh)?;
    solve_with_operator(spec, &op, tg)
}

pub(crate) fn solve_with_operator(spec: &ProblemSpec, op: &FemOperator, tg: &TimeGrid) -> Result<Trajectory> {
    let stepper = op.stepper(tg)?;
    let loads = problem_loads(spec, op);
    let u0 = spec.initial.sample(op.mesh).into_values();
    let w0: Vec<f64> = op.interior(&u0).iter().zip(op.interior(&op.lift)).map(|(u, l)| u - l).collect();
    let states = stepper.march_vec(&w0, |_, t, rhs| {
        rhs.iter_mut().zip(&loads.fixed).for_each(|(r, f)| *r += f);
        if let Some((g, psi)) = &loads.profile {
            let gt = g.eval(t);
            rhs.iter_mut().zip(psi).for_each(|(r, p)| *r += gt * p);
        }
    });
    let mut fields = Vec::with_capacity(states.len());
    for (n, w) in states.iter().enumerate() {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at step {n}")));
        }
        let mut full = op.full_from_interior(w);
        if n == 0 {
            // keep the sampled initial data, including boundary values
            full = u0.clone();
        }
        fields.push(Field::new(op.mesh, full)?);
    }
    Ok(Trajectory { grid: *tg, states: fields })
}

/// L1 approximation of `∂ₜᵅu` at the final time of a trajectory.
pub fn caputo_residual_at_t(traj: &Trajectory, alpha: f64) -> Result<Field> {
    let n = traj.states.len();
    if n < 2 {
        return Err(Error::InsufficientHistory { needed: 2, got: n });
    }
    let steps = n - 1;
    let grid = TimeGrid::new(steps, traj.grid.t_final)?;
    let w = L1Weights::new(alpha, &grid);
    let mesh = traj.states[0].mesh();
    let mut out = vec![0.0; mesh.n_nodes()];
    for j in 0..steps {
        let a = traj.states[steps - j].values();
        let b = traj.states[steps - j - 1].values();
        for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
            *o += w.b[j] * (x - y);
        }
    }
    out.iter_mut().for_each(|v| *v *= w.scale);
    Field::new(mesh, out)
}

/// Observed orders of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub h: Vec<f64>,
    pub space_errors: Vec<f64>,
    pub space_order: f64,
    pub tau: Vec<f64>,
    pub time_errors: Vec<f64>,
    pub time_order: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Refinement study at the terminal time. Spatial errors are successive
/// differences over `cells` at the finest step count; temporal errors are
/// measured at the finest mesh against `reference` when given, otherwise as
/// successive differences over `steps`.
pub fn convergence_study(
    spec: &ProblemSpec,
    cells: &[usize],
    steps: &[usize],
    reference: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>,
) -> Result<ConvergenceReport> {
    if cells.len() < 2 || steps.len() < 2 {
        return Err(Error::Parameter("convergence study needs at least two levels each".into()));
    }
    let n_fine = *steps.iter().max().expect("nonempty");
    let c_fine = *cells.iter().max().expect("nonempty");
    let tg_fine = TimeGrid::new(n_fine, spec.t_final)?;
    let space: Vec<Field> = cells
        .iter()
        .map(|&c| solve_fem(spec, spec.mesh(c)?, &tg_fine).map(|t| t.last().clone()))
        .collect::<Result<_>>()?;
    let space_errors: Vec<f64> = space.windows(2).map(|w| l2_distance(&w[0], &w[1])).collect();
    let h: Vec<f64> = cells[..cells.len() - 1].iter().map(|&c| 1.0 / c as f64).collect();
    let mesh_fine = spec.mesh(c_fine)?;
    let time: Vec<Field> = steps
        .iter()
        .map(|&n| solve_fem(spec, mesh_fine, &TimeGrid::new(n, spec.t_final)?).map(|t| t.last().clone()))
        .collect::<Result<_>>()?;
    let (tau, time_errors): (Vec<f64>, Vec<f64>) = match reference {
        Some(r) => {
            let exact = Field::from_fn(mesh_fine, r);
            steps
                .iter()
                .zip(&time)
                .map(|(&n, u)| (spec.t_final / n as f64, l2_norm(&u.sub(&exact).expect("same mesh"))))
                .unzip()
        }
        None => steps
            .windows(2)
            .zip(time.windows(2))
            .map(|(n, u)| (spec.t_final / n[0] as f64, l2_distance(&u[0], &u[1])))
            .unzip(),
    };
    Ok(ConvergenceReport {
        space_order: loglog_slope(&h, &space_errors),
        time_order: loglog_slope(&tau, &time_errors),
        h,
        space_errors,
        tau,
        time_errors,
    })
}

/// Writes a nodal field as CSV with columns `x,value` or `x,y,value`.
pub fn write_field_csv<W: Write>(field: &Field, mut out: W) -> Result<()> {
    let mesh = field.mesh();
    if mesh.dim() == 1 {
        writeln!(out, "x,value")?;
    } else {
        writeln!(out, "x,y,value")?;
    }
    for (k, v) in field.values().iter().enumerate() {
        let (x, y) = mesh.coords(k);
        if mesh.dim() == 1 {
            writeln!(out, "{x:.10},{v:.16e}")?;
        } else {
            writeln!(out, "{x:.10},{y:.10},{v:.16e}")?;
        }
    }
    Ok(())
}

/// Writes every time level of a trajectory as CSV with columns `t,x[,y],value`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let mesh = traj.states[0].mesh();
    if mesh.dim() == 1 {
        writeln!(out, "t,x,value")?;
    } else {
        writeln!(out, "t,x,y,value")?;
    }
    for (n, f) in traj.states.iter().enumerate() {
        let t = traj.grid.time(n);
        for (k, v) in f.values().iter().enumerate() {
            let (x, y) = mesh.coords(k);
            if mesh.dim() == 1 {
                writeln!(out, "{t:.10},{x:.10},{v:.16e}")?;
            } else {
                writeln!(out, "{t:.10},{x:.10},{y:.10},{v:.16e}")?;
            }
        }
    }
    Ok(())
}

/// True when the problem has homogeneous Dirichlet data.
pub fn is_homogeneous(spec: &ProblemSpec) -> bool {
    matches!(spec.dirichlet, Dirichlet::Homogeneous)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn mass_and_stiffness_sum_rules() {
        for mesh in [Mesh::interval(7).unwrap(), Mesh::square(5).unwrap()] {
            let m = mass_matrix(mesh, &Func::Const(1.0));
            let ones = vec![1.0; mesh.n_nodes()];
            assert_relative_eq!(m.dot(&ones, &ones), 1.0, epsilon = 1e-13);
            let s = stiffness_matrix(mesh, &Func::Const(1.0));
            let ks = s.mul_vec(&ones);
            assert!(ks.iter().all(|v| v.abs() < 1e-10));
            let x: Vec<f64> = (0..mesh.n_nodes()).map(|k| mesh.coords(k).0).collect();
            // ∫ |∇x|² = 1
            assert_relative_eq!(s.dot(&x, &x), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn weighted_mass_is_exact_for_p1_weight() {
        let mesh = Mesh::interval(4).unwrap();
        let w = Field::from_fn(mesh, |x, _| x);
        let m = mass_matrix(mesh, &Func::Nodal(w));
        let ones = vec![1.0; mesh.n_nodes()];
        // ∫ x dx = 1/2
        assert_relative_eq!(m.dot(&ones, &ones), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn l1_weights_positive_decreasing() {
        for k in 1..10 {
            let alpha = k as f64 / 10.0;
            let w = L1Weights::new(alpha, &TimeGrid::new(50, 1.0).unwrap());
            assert_eq!(w.b[0], 1.0);
            for j in 0..50 {
                assert!(w.b[j] > w.b[j + 1] && w.b[j + 1] > 0.0);
            }
        }
    }

    #[test]
    fn caputo_of_linear_function_is_exact() {
        let mesh = Mesh::interval(4).unwrap();
        let v = Field::from_fn(mesh, |x, _| 1.0 + x);
        let grid = TimeGrid::new(16, 0.5).unwrap();
        let states = (0..=16).map(|n| v.scale(grid.time(n))).collect();
        let traj = Trajectory { grid, states };
        let d = caputo_residual_at_t(&traj, 0.5).unwrap();
        let factor = 0.5f64.sqrt() / gamma(1.5);
        for (a, b) in d.values().iter().zip(v.values()) {
            assert_relative_eq!(*a, factor * b, max_relative = 1e-12);
        }
        let short = Trajectory { grid, states: vec![v.clone()] };
        assert!(matches!(caputo_residual_at_t(&short, 0.5), Err(Error::InsufficientHistory { needed: 2, got: 1 })));
    }

    #[test]
    fn steady_state_reached() {
        let spec = ProblemSpec::interval(0.9, Func::Const(0.0), 1.0e4)
            .with_source(Source::Steady(Func::analytic(|x, _| (PI * x).sin())));
        let mesh = Mesh::interval(64).unwrap();
        let traj = solve_fem(&spec, mesh, &TimeGrid::new(200, 1.0e4).unwrap()).unwrap();
        let target = Field::from_fn(mesh, |x, _| (PI * x).sin() / (PI * PI));
        assert!(l2_distance(traj.last(), &target) < 1e-3);
    }

    #[test]
    fn lift_gives_affine_steady_state() {
        let spec = ProblemSpec::interval(0.5, Func::Const(0.0), 1.0e6).with_dirichlet(Dirichlet::Constants(1.0, 2.0));
        let mesh = Mesh::interval(16).unwrap();
        let traj = solve_fem(&spec, mesh, &TimeGrid::new(100, 1.0e6).unwrap()).unwrap();
        for (k, v) in traj.last().values().iter().enumerate() {
            let x = mesh.coords(k).0;
            assert!((v - (1.0 + x)).abs() < 1e-2, "{k} {v}");
        }
    }
}
