//! Joint reconstruction of a spatial parameter and the terminal time from one
//! snapshot `u(T)`, by Levenberg-Marquardt on the discrete forward map, plus
//! the direct formula for the potential.
//!
//! The unknown `v` is represented by its interior nodal values; boundary values
//! stay at those of the initial guess. All inner products are `L²`
//! products through the interior mass matrix `M`, so the normal equations read
//! `[JᵀMJ + γM, JᵀM j_T; j_TᵀMJ, j_TᵀM j_T + μ] [δv; δT] = [JᵀM r; j_TᵀM r]`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fem::{self, FemOperator, TimeGrid, Trajectory};
use crate::field::{Field, Func, TimeProfile};
use crate::linalg::BandedSym;
use crate::mesh::Mesh;
use crate::problem::{Dirichlet, ProblemSpec, Source};
use crate::spectral::{build_eigendecomposition, estimate_t, potential_estimator_data, EstimatorKind};

/// Name of the generator used by [`add_noise`].
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64; StandardNormal (rand_distr 0.5)";

/// Upper bound of the admissible potentials.
pub const DEFAULT_C0: f64 = 2.0;

/// Violation of `[0, c0]` tolerated before clamping turns into an error.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Unknown initial condition.
    Backward,
    /// Unknown spatial factor of a separable source.
    Source,
    /// Unknown potential.
    Potential,
}

/// Observed terminal snapshot.
#[derive(Debug, Clone)]
pub struct Observation {
    pub g_delta: Field,
    pub epsilon: f64,
    pub seed: u64,
    /// `‖g†‖_{L∞}`, the scale of the noise.
    pub g_dag_sup: f64,
    /// Kept for evaluation only; never read by the solver.
    pub t_true: Option<f64>,
}

/// `g^δ = g† + ε ‖g†‖_{L∞} ξ` with `ξ` i.i.d. standard normal per node.
pub fn add_noise(g_dag: &Field, epsilon: f64, seed: u64) -> Result<Observation> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("noise level must be nonnegative, got {epsilon}")));
    }
    let sup = g_dag.max_abs();
    let mut g = g_dag.clone();
    if epsilon > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in g.values_mut() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            *v += epsilon * sup * xi;
        }
    }
    if g.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite observation".into()));
    }
    Ok(Observation { g_delta: g, epsilon, seed, g_dag_sup: sup, t_true: None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run all iterations and report the last one.
    MaxIter,
    /// Stop at the first `r ≤ η δ`, `δ` the expected noise norm.
    Discrepancy { eta: f64 },
    /// Report the iterate with the smallest error (needs the truth).
    BestError,
}

#[derive(Debug, Clone)]
pub struct LmConfig {
    pub gamma0: f64,
    pub mu0: f64,
    pub rho: f64,
    pub delta_t: f64,
    pub max_iter: usize,
    pub t_init: f64,
    pub v_init: Field,
    pub stop: StopRule,
    /// Upper clamp of the potential.
    pub c0: f64,
}

impl LmConfig {
    pub fn new(gamma0: f64, mu0: f64, rho: f64, max_iter: usize, t_init: f64, v_init: Field) -> Self {
        Self { gamma0, mu0, rho, delta_t: 1e-3, max_iter, t_init, v_init, stop: StopRule::MaxIter, c0: DEFAULT_C0 }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.mu0 > 0.0) {
            return Err(Error::Parameter("gamma0 and mu0 must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Parameter(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.delta_t > 0.0) {
            return Err(Error::Parameter("deltaT must be positive".into()));
        }
        if !(self.t_init > self.delta_t) {
            return Err(Error::Parameter(format!("T_init must exceed deltaT, got {}", self.t_init)));
        }
        if let StopRule::Discrepancy { eta } = self.stop {
            if !(eta > 0.0) {
                return Err(Error::Parameter("discrepancy factor must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub k: usize,
    pub residual: f64,
    /// `NaN` when no truth is available.
    pub error: f64,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub v_hat: Field,
    pub t_hat: f64,
    pub k_star: usize,
    pub history: Vec<HistoryEntry>,
    pub converged: bool,
}

/// A reconstruction problem: the known data of one forward problem, a mesh
/// and a step count. The unknown component of `spec` is ignored.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub kind: Kind,
    pub spec: ProblemSpec,
    pub mesh: Mesh,
    pub n_steps: usize,
    base: FemOperator,
    profile: TimeProfile,
}

impl InverseProblem {
    pub fn new(kind: Kind, spec: ProblemSpec, mesh: Mesh, n_steps: usize) -> Result<Self> {
        if n_steps < 1 {
            return Err(Error::Parameter("at least one time step is required".into()));
        }
        let mut known = spec.clone();
        if kind == Kind::Potential {
            known.potential = Func::Const(0.0);
        }
        let base = FemOperator::new(&known, mesh)?;
        let profile = match &spec.source {
            Source::Separable { g, .. } => g.clone(),
            Source::Steady(_) => TimeProfile::Constant(1.0),
        };
        Ok(Self { kind, spec, mesh, n_steps, base, profile })
    }

    pub fn n_unknowns(&self) -> usize {
        self.mesh.n_interior()
    }

    /// Interior mass matrix, the Gram matrix of the unknown and data spaces.
    pub fn mass(&self) -> &BandedSym {
        &self.base.mass
    }

    /// Projects a potential into `[0, c0]`, failing when the violation exceeds the tolerance.
    pub fn admissible(&self, v: &Field, c0: f64) -> Result<Field> {
        if self.kind != Kind::Potential {
            return Ok(v.clone());
        }
        let (lo, hi) = v.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if lo < -ADMISSIBILITY_TOL || hi > c0 + ADMISSIBILITY_TOL || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Admissibility(format!("potential range [{lo:e}, {hi:e}] outside [0, {c0}]")));
        }
        Ok(v.map(|x| x.clamp(0.0, c0)))
    }

    fn spec_with(&self, v: &Field) -> ProblemSpec {
        let mut s = self.spec.clone();
        s.t_final = 1.0;
        match self.kind {
            Kind::Backward => s.initial = Func::Nodal(v.clone()),
            Kind::Source => s.source = Source::Separable { g: self.profile.clone(), psi: Func::Nodal(v.clone()) },
            Kind::Potential => s.potential = Func::Nodal(v.clone()),
        }
        s
    }

    fn operator_for(&self, v: &Field) -> Result<FemOperator> {
        match self.kind {
            Kind::Potential => FemOperator::new(&self.spec_with(v), self.mesh),
            _ => Ok(self.base.clone()),
        }
    }

    fn trajectory(&self, v: &Field, t: f64) -> Result<(FemOperator, Trajectory)> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("terminal time must be positive, got {t}")));
        }
        let v = self.admissible(v, f64::INFINITY)?;
        let op = self.operator_for(&v)?;
        let mut spec = self.spec_with(&v);
        spec.t_final = t;
        let traj = fem::solve_with_operator(&spec, &op, &TimeGrid::new(self.n_steps, t)?)?;
        Ok((op, traj))
    }

    /// `F(v, T) = u(v)(T)` by the finite element solver.
    pub fn forward_map(&self, v: &Field, t: f64) -> Result<Field> {
        Ok(self.trajectory(v, t)?.1.last().clone())
    }

    /// Columns `J_v h` for the columns `h` of `dirs` (interior values).
    pub fn sensitivity(&self, v: &Field, t: f64, dirs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.n_unknowns();
        if dirs.nrows() != n {
            return Err(Error::Shape { expected: n, got: dirs.nrows() });
        }
        let cols = dirs.ncols();
        let tg = TimeGrid::new(self.n_steps, t)?;
        let out = match self.kind {
            Kind::Backward => {
                let stepper = self.base.stepper(&tg)?;
                stepper.march(dirs.clone(), |_, _, _| {}).last().clone()
            }
            Kind::Source => {
                let stepper = self.base.stepper(&tg)?;
                let md = banded_times(&self.base.mass, dirs);
                let g = self.profile.clone();
                stepper
                    .march(DMatrix::zeros(n, cols), |_, time, rhs| {
                        *rhs += &md * g.eval(time);
                    })
                    .last()
                    .clone()
            }
            Kind::Potential => {
                let (op, traj) = self.trajectory(v, t)?;
                let stepper = op.stepper(&tg)?;
                let weighted: Vec<BandedSym> = traj
                    .states
                    .iter()
                    .map(|u| fem::restrict_interior(self.mesh, &fem::mass_matrix(self.mesh, &Func::Nodal(u.clone()))))
                    .collect();
                stepper
                    .march(DMatrix::zeros(n, cols), |step, _, rhs| {
                        *rhs -= banded_times(&weighted[step], dirs);
                    })
                    .last()
                    .clone()
            }
        };
        Ok(out)
    }

    /// Jacobian `∂_v F(v, T)` assembled column by column.
    pub fn jacobian_v(&self, v: &Field, t: f64) -> Result<DMatrix<f64>> {
        self.sensitivity(v, t, &DMatrix::identity(self.n_unknowns(), self.n_unknowns()))
    }

    /// `J_v h` as a full field (zero boundary values).
    pub fn jacobian_v_apply(&self, v: &Field, t: f64, h: &Field) -> Result<Field> {
        let d = DMatrix::from_column_slice(self.n_unknowns(), 1, &h.interior());
        let w = self.sensitivity(v, t, &d)?;
        Field::from_interior(self.mesh, w.as_slice())
    }

    /// Adjoint `J_v* w = M⁻¹ J_vᵀ M w` with respect to the `L²` products.
    pub fn jacobian_v_adjoint(&self, v: &Field, t: f64, w: &Field) -> Result<Field> {
        let j = self.jacobian_v(v, t)?;
        let mw = DVector::from_vec(self.base.mass.mul_vec(&w.interior()));
        let jt = j.transpose() * mw;
        let chol = self.base.mass.cholesky()?;
        Field::from_interior(self.mesh, &chol.solve(jt.as_slice()))
    }

    /// Forward difference `(F(v, T + δT) − F(v, T)) / δT`.
    pub fn jacobian_t(&self, v: &Field, t: f64, delta_t: f64) -> Result<Field> {
        let a = self.forward_map(v, t)?;
        let b = self.forward_map(v, t + delta_t)?;
        Ok(b.sub(&a)?.scale(1.0 / delta_t))
    }

    /// `L²` norm of a full field.
    pub fn norm(&self, f: &Field) -> f64 {
        self.base.mass_full.dot(f.values(), f.values()).max(0.0).sqrt()
    }

    /// Expected `L²` norm of the noise field of an observation.
    pub fn noise_norm(&self, obs: &Observation) -> f64 {
        let trace: f64 = (0..self.mesh.n_nodes()).map(|k| self.base.mass_full.get(k, k)).sum();
        obs.epsilon * obs.g_dag_sup * trace.sqrt()
    }

    /// One iteration: solves the regularized normal equations at `(v, T)`
    /// with weights `γ` (on `v`) and `μ` (on `T`). Returns the new iterate.
    pub fn lm_step(
        &self,
        v: &Field,
        t: f64,
        obs: &Observation,
        gamma: f64,
        mu: f64,
        cfg: &LmConfig,
    ) -> Result<(Field, f64)> {
        let f = self.forward_map(v, t)?;
        let j = self.jacobian_v(v, t)?;
        let jt = self.jacobian_t(v, t, cfg.delta_t)?;
        let residual = obs.g_delta.sub(&f)?.interior();
        let (dv, dt) = solve_normal_equations(&self.base.mass, &j, &jt.interior(), &residual, gamma, mu)?;
        let mut t_new = t + dt;
        let mut step = dt;
        let mut halvings = 0;
        while t_new <= cfg.delta_t {
            step *= 0.5;
            t_new = t + step;
            halvings += 1;
            if halvings > 60 {
                return Err(Error::Numerical("terminal-time update cannot be kept positive".into()));
            }
        }
        let interior: Vec<f64> = v.interior().iter().zip(dv.iter()).map(|(a, b)| a + b).collect();
        let mut v_new = Field::from_interior_with_boundary(self.mesh, &interior, v)?;
        if self.kind == Kind::Potential {
            v_new = v_new.map(|x| x.clamp(0.0, cfg.c0));
        }
        Ok((v_new, t_new))
    }

    /// Runs the iteration with `γᵏ = γ₀ρᵏ`, `μᵏ = μ₀ρᵏ` and selects `k*` by the stop rule.
    pub fn lm_reconstruct(
        &self,
        obs: &Observation,
        cfg: &LmConfig,
        truth: Option<&Field>,
    ) -> Result<ReconstructionResult> {
        cfg.validate()?;
        if cfg.stop == StopRule::BestError && truth.is_none() {
            return Err(Error::Parameter("best-error stopping needs the true parameter".into()));
        }
        if obs.g_delta.mesh() != self.mesh || cfg.v_init.mesh() != self.mesh {
            return Err(Error::Shape { expected: self.mesh.n_nodes(), got: obs.g_delta.values().len() });
        }
        let delta = self.noise_norm(obs);
        let mut v = self.admissible(&cfg.v_init, cfg.c0)?;
        let mut t = cfg.t_init;
        let mut history: Vec<HistoryEntry> = Vec::with_capacity(cfg.max_iter + 1);
        let mut best: Option<(f64, usize, Field, f64)> = None;
        let mut converged = false;
        let mut chosen: Option<(usize, Field, f64)> = None;
        for k in 0..=cfg.max_iter {
            let f = self.forward_map(&v, t)?;
            let r = self.norm(&obs.g_delta.sub(&f)?);
            let e = truth.map_or(f64::NAN, |tr| v.sub(tr).map(|d| self.norm(&d)).unwrap_or(f64::NAN));
            history.push(HistoryEntry { k, residual: r, error: e, t });
            if !r.is_finite() || !t.is_finite() {
                return Err(Error::Divergence { step: k, reason: format!("residual {r}, T {t}; history {history:?}") });
            }
            if truth.is_some() && best.as_ref().is_none_or(|b| e < b.0) {
                best = Some((e, k, v.clone(), t));
            }
            if let StopRule::Discrepancy { eta } = cfg.stop {
                if r <= eta * delta {
                    converged = true;
                    chosen = Some((k, v.clone(), t));
                    break;
                }
            }
            if k == cfg.max_iter {
                break;
            }
            let scale = cfg.rho.powi(k as i32);
            let step = self.lm_step(&v, t, obs, cfg.gamma0 * scale, cfg.mu0 * scale, cfg);
            (v, t) = step?;
        }
        let (k_star, v_hat, t_hat) = match cfg.stop {
            StopRule::BestError => {
                let (_, k, v, t) = best.expect("truth given, at least one iterate");
                converged = true;
                (k, v, t)
            }
            StopRule::Discrepancy { .. } if chosen.is_some() => chosen.expect("checked"),
            _ => (history.len() - 1, v, t),
        };
        Ok(ReconstructionResult { v_hat, t_hat, k_star, history, converged })
    }
}

fn banded_times(m: &BandedSym, x: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = x.shape();
    let mut out = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let col: Vec<f64> = x.column(c).iter().copied().collect();
        let y = m.mul_vec(&col);
        out.column_mut(c).copy_from_slice(&y);
    }
    out
}

/// Solves the bordered normal system for `(δv, δT)`.
pub fn solve_normal_equations(
    mass: &BandedSym,
    j: &DMatrix<f64>,
    jt: &[f64],
    residual: &[f64],
    gamma: f64,
    mu: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = j.ncols();
    let mj = banded_times(mass, j);
    let mjt = DVector::from_vec(mass.mul_vec(jt));
    let mr = DVector::from_vec(mass.mul_vec(residual));
    let jt_v = DVector::from_column_slice(jt);
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let jmj = j.transpose() * &mj;
    a.view_mut((0, 0), (n, n)).copy_from(&jmj);
    let dense_mass = mass.to_dense();
    a.view_mut((0, 0), (n, n)).zip_apply(&dense_mass, |x, m| *x += gamma * m);
    let cross = j.transpose() * &mjt;
    a.view_mut((0, n), (n, 1)).copy_from(&cross);
    a.view_mut((n, 0), (1, n)).copy_from(&cross.transpose());
    a[(n, n)] = jt_v.dot(&mjt) + mu;
    let mut b = DVector::zeros(n + 1);
    b.rows_mut(0, n).copy_from(&(j.transpose() * &mr));
    b[n] = jt_v.dot(&mr);
    let chol = a.cholesky().ok_or_else(|| Error::Numerical("normal matrix is not positive definite".into()))?;
    let x = chol.solve(&b);
    Ok((x.rows(0, n).iter().copied().collect(), x[n]))
}

/// Terminal-time prior from the observation: the asymptotic ratio estimator
/// on the sine coefficients of `g^δ` over the 1-based mode `window`. Needs the
/// interval with `a ≡ 1`, and `q ≡ 0` unless the potential is the unknown.
pub fn estimate_initial_t(ip: &InverseProblem, obs: &Observation, window: (usize, usize)) -> Result<f64> {
    let spec = &ip.spec;
    if ip.mesh.dim() != 1 || !matches!(spec.diffusion, Func::Const(a) if a == 1.0) {
        return Err(Error::Parameter("the terminal-time prior needs the interval with unit diffusion".into()));
    }
    if ip.kind != Kind::Potential && !spec.potential.is_zero() {
        return Err(Error::Parameter("the terminal-time prior needs a zero potential".into()));
    }
    let modes = (ip.mesh.cells() / 4).max(1);
    let ed = build_eigendecomposition(&Field::zeros(ip.mesh), modes)?;
    let (kind, observed, reference, eig) = match ip.kind {
        Kind::Backward => {
            let f = match &spec.source {
                Source::Steady(f) => f.clone(),
                Source::Separable { g: TimeProfile::Constant(c), psi } => {
                    let c = *c;
                    let psi = psi.clone();
                    Func::analytic(move |x, y| c * psi.eval(x, y))
                }
                Source::Separable { .. } => {
                    return Err(Error::Parameter("the backward prior needs a time-independent source".into()))
                }
            };
            (EstimatorKind::Backward, ed.coefficients_of(&obs.g_delta), ed.coefficients(&f), ed.eigenvalues.clone())
        }
        Kind::Source => (
            EstimatorKind::Source,
            ed.coefficients_of(&obs.g_delta),
            ed.coefficients(&spec.initial),
            ed.eigenvalues.clone(),
        ),
        Kind::Potential => {
            let (a0, a1) = match spec.dirichlet {
                Dirichlet::Homogeneous => (0.0, 0.0),
                Dirichlet::Constants(a0, a1) => (a0, a1),
            };
            let (o, r, e) = potential_estimator_data(&obs.g_delta, &spec.initial, a0, a1, modes)?;
            (EstimatorKind::Potential, o, r, e)
        }
    };
    Ok(estimate_t(kind, &observed, &reference, &eig, spec.alpha, window)?.t_hat)
}

/// Initial terminal time: the estimator prior when it succeeds and lands in
/// `range`, otherwise `fallback`. The flag tells whether the prior was used.
pub fn choose_initial_t(
    ip: &InverseProblem,
    obs: &Observation,
    window: (usize, usize),
    fallback: f64,
    range: (f64, f64),
) -> (f64, bool) {
    match estimate_initial_t(ip, obs, window) {
        Ok(t) if t.is_finite() && t >= range.0 && t <= range.1 => (t, true),
        _ => (fallback, false),
    }
}

/// Per-iterate `(e, r)` of a reconstruction history.
pub fn metrics(result: &ReconstructionResult) -> Vec<(f64, f64)> {
    result.history.iter().map(|h| (h.error, h.residual)).collect()
}

/// `L²` error of a reconstruction against the truth.
pub fn l2_error(v_hat: &Field, truth: &Field) -> Result<f64> {
    Ok(fem::l2_norm(&v_hat.sub(truth)?))
}

/// Exact data `u(T)` computed on a fine space-time mesh and interpolated onto `target`.
pub fn exact_data(spec: &ProblemSpec, fine_cells: usize, fine_steps: usize, target: Mesh) -> Result<Field> {
    let mesh = spec.mesh(fine_cells)?;
    let traj = fem::solve_fem(spec, mesh, &TimeGrid::new(fine_steps, spec.t_final)?)?;
    Ok(traj.last().resample(target))
}

/// Nodal potential `q = (f − ∂ₜᵅu(T) + ∂ₓₓu(T)) / u(T)` from a trajectory.
/// The residual `F − K u − M ∂ₜᵅu` of the assembled equations (L1 sum for the
/// Caputo term) is divided by the lumped mass of `q u`. Values are
/// clamped into `[0, c0]`; boundary values are extrapolated linearly.
pub fn direct_ipp_reconstruct(traj: &Trajectory, spec: &ProblemSpec, floor: f64, c0: f64) -> Result<Field> {
    let mesh = traj.last().mesh();
    if mesh.dim() != 1 {
        return Err(Error::Parameter("the direct potential formula is implemented on the interval".into()));
    }
    let cells = mesh.cells();
    if cells < 3 {
        return Err(Error::Parameter("the direct potential formula needs at least three cells".into()));
    }
    let u = traj.last();
    for k in 1..cells {
        let value = u.values()[k];
        if !(value >= floor) {
            return Err(Error::Positivity { node: k, value, floor });
        }
    }
    // boundary data is constant in time; the sampled u₀ may disagree with it at t = 0
    let mut caputo = fem::caputo_residual_at_t(traj, spec.alpha)?;
    caputo.values_mut()[0] = 0.0;
    caputo.values_mut()[cells] = 0.0;
    let t = traj.grid.t_final;
    let f = match &spec.source {
        Source::Steady(f) => fem::load_vector(mesh, f),
        Source::Separable { g, psi } => {
            let gt = g.eval(t);
            fem::load_vector(mesh, psi).into_iter().map(|v| gt * v).collect()
        }
    };
    let ku = fem::stiffness_matrix(mesh, &spec.diffusion).mul_vec(u.values());
    let mc = fem::mass_matrix(mesh, &Func::Const(1.0)).mul_vec(caputo.values());
    let h = mesh.h();
    let mut q = vec![0.0; cells + 1];
    for k in 1..cells {
        let value = (f[k] - ku[k] - mc[k]) / h;
        q[k] = (value / u.values()[k]).clamp(0.0, c0);
    }
    q[0] = (2.0 * q[1] - q[2]).clamp(0.0, c0);
    q[cells] = (2.0 * q[cells - 1] - q[cells - 2]).clamp(0.0, c0);
    Field::new(mesh, q)
}
