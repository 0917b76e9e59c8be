//! Experiment runners behind the subcommands.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use subdiff_core::fem::{convergence_study, solve_fem, write_field_csv, ConvergenceReport, TimeGrid};
use subdiff_core::field::{Field, Func, TimeProfile};
use subdiff_core::inverse::{
    add_noise, choose_initial_t, exact_data, l2_error, HistoryEntry, InverseProblem, Kind, LmConfig, Observation,
    ReconstructionResult, StopRule, RNG_NAME,
};
use subdiff_core::mesh::Mesh;
use subdiff_core::problem::{ProblemSpec, Source};
use subdiff_core::spectral::{build_eigendecomposition, estimate_t, solve_spectral, EstimatorKind};

use crate::config::{ConfigError, EstimatorCase, ExperimentConfig, StopChoice, TInit};
use crate::examples::{bp1_source, Example, T_TRUE};

/// Plausible range of the estimator prior; outside it the fallback is used.
pub const PRIOR_RANGE: (f64, f64) = (0.05, 5.0);

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] subdiff_core::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl RunError {
    /// 2 for configuration errors, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

pub type RunResult<T> = Result<T, RunError>;

fn cell_tag(alpha: f64, epsilon: f64) -> String {
    format!("a{alpha}_e{epsilon}")
}

fn write_text(path: &Path, text: &str) -> RunResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_field(path: &Path, field: &Field) -> RunResult<()> {
    let mut buf = Vec::new();
    write_field_csv(field, &mut buf)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, buf)?;
    Ok(())
}

// ---------------------------------------------------------------- forward

#[derive(Debug, Clone)]
pub struct ForwardSummary {
    pub alpha: f64,
    pub sup_norm: f64,
    pub runtime: Duration,
}

/// Solves the forward problem of the example for every order and writes
/// `snapshot.csv`, `observation.csv` (first noise level) and `metadata.txt`
/// into one directory per order; runtimes go to `timing.txt` so that the
/// other files are reproducible byte for byte.
pub fn run_forward(cfg: &ExperimentConfig, out: &Path) -> RunResult<Vec<ForwardSummary>> {
    let mut summaries = Vec::new();
    let mut timing = String::from("alpha,seconds\n");
    let epsilon = cfg.epsilons[0];
    for (i, &alpha) in cfg.alphas.iter().enumerate() {
        let start = Instant::now();
        let spec = cfg.example.spec(alpha);
        let mesh = spec.mesh(cfg.cells)?;
        let traj = solve_fem(&spec, mesh, &TimeGrid::new(cfg.steps, spec.t_final)?)?;
        let snapshot = traj.last().clone();
        let seed = cfg.cell_seed(i, 0);
        let obs = add_noise(&snapshot, epsilon, seed)?;
        let runtime = start.elapsed();
        let dir = out.join(format!("a{alpha}"));
        write_field(&dir.join("snapshot.csv"), &snapshot)?;
        write_field(&dir.join("observation.csv"), &obs.g_delta)?;
        let sup = snapshot.max_abs();
        let meta = format!(
            "example = {}\nalpha = {alpha}\nt_final = {}\ndim = {}\ncells = {}\nsteps = {}\nepsilon = {epsilon}\nseed = {seed}\nrng = {RNG_NAME}\nsup_norm = {sup:.16e}\n",
            cfg.example,
            spec.t_final,
            mesh.dim(),
            cfg.cells,
            cfg.steps,
        );
        write_text(&dir.join("metadata.txt"), &meta)?;
        timing.push_str(&format!("{alpha},{:.3}\n", runtime.as_secs_f64()));
        summaries.push(ForwardSummary { alpha, sup_norm: sup, runtime });
    }
    write_text(&out.join("timing.txt"), &timing)?;
    Ok(summaries)
}

// ---------------------------------------------------------------- cells

/// One `(α, ε)` cell ready for reconstruction.
pub struct Cell {
    pub alpha: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub problem: InverseProblem,
    pub observation: Observation,
    pub truth: Field,
}

/// Builds the data of cell `(i_alpha, i_eps)`: exact data on a mesh refined
/// by `data_refinement` in space and time, interpolated and perturbed with
/// the cell seed.
pub fn prepare_cell(cfg: &ExperimentConfig, i_alpha: usize, i_eps: usize) -> RunResult<Cell> {
    let alpha = cfg.alphas[i_alpha];
    let epsilon = cfg.epsilons[i_eps];
    let seed = cfg.cell_seed(i_alpha, i_eps);
    let spec = cfg.example.spec(alpha);
    let mesh = spec.mesh(cfg.cells)?;
    let r = cfg.data_refinement;
    let g = exact_data(&spec, r * cfg.cells, r * cfg.steps, mesh)?;
    let mut observation = add_noise(&g, epsilon, seed)?;
    observation.t_true = Some(T_TRUE);
    let truth = cfg.example.truth().sample(mesh);
    let problem = InverseProblem::new(cfg.example.kind(), spec, mesh, cfg.steps)?;
    Ok(Cell { alpha, epsilon, seed, problem, observation, truth })
}

/// Iteration settings of a cell, with the starting `T` and whether it came
/// from the estimator prior.
pub fn lm_config_for(cfg: &ExperimentConfig, i_alpha: usize, cell: &Cell) -> RunResult<(LmConfig, bool)> {
    let d = cfg.example.lm_defaults(cell.alpha);
    let (t0, prior) = match cfg.lm.t_init {
        TInit::Value(v) => (v, false),
        TInit::Estimate => {
            choose_initial_t(&cell.problem, &cell.observation, cfg.lm.prior_window, cfg.lm.t_fallback, PRIOR_RANGE)
        }
    };
    let mut lm = LmConfig::new(
        cfg.lm.gamma0.unwrap_or(d.gamma0),
        cfg.mu0_for(i_alpha).unwrap_or(d.mu0),
        cfg.lm.rho.unwrap_or(d.rho),
        cfg.lm.max_iter.unwrap_or(d.max_iter),
        t0,
        Field::zeros(cell.problem.mesh),
    );
    lm.delta_t = cfg.lm.delta_t;
    lm.stop = match cfg.lm.stop {
        StopChoice::BestError => StopRule::BestError,
        StopChoice::Discrepancy => StopRule::Discrepancy { eta: cfg.lm.eta },
        StopChoice::MaxIter => StopRule::MaxIter,
    };
    lm.validate()?;
    Ok((lm, prior))
}

/// One row of a replication table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub case: String,
    pub alpha: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub e: f64,
    pub k_star: Option<usize>,
    pub t_hat: f64,
    pub t_init: f64,
    pub t_init_from_prior: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TableReport {
    pub rows: Vec<TableRow>,
}

impl TableReport {
    pub fn to_csv(&self) -> RunResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "case",
                "alpha",
                "epsilon",
                "seed",
                "e",
                "k_star",
                "t_hat",
                "t_init",
                "t_init_from_prior",
                "note",
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| RunError::Io(e.to_string()))
    }
}

/// A finished cell: its table row and, unless it failed, the full result.
pub struct CellRun {
    pub row: TableRow,
    pub result: Option<ReconstructionResult>,
    pub truth: Option<Field>,
    pub runtime: Duration,
}

/// Reconstructs cell `(i_alpha, i_eps)`. Failures are recorded in the row
/// (NaN entries and the error text) rather than returned.
pub fn run_cell(cfg: &ExperimentConfig, i_alpha: usize, i_eps: usize) -> CellRun {
    let start = Instant::now();
    let alpha = cfg.alphas[i_alpha];
    let epsilon = cfg.epsilons[i_eps];
    let mut row = TableRow {
        case: cfg.example.to_string(),
        alpha,
        epsilon,
        seed: cfg.cell_seed(i_alpha, i_eps),
        e: f64::NAN,
        k_star: None,
        t_hat: f64::NAN,
        t_init: f64::NAN,
        t_init_from_prior: false,
        note: String::new(),
    };
    let attempt = || -> RunResult<(ReconstructionResult, Field, f64, bool)> {
        let cell = prepare_cell(cfg, i_alpha, i_eps)?;
        let (lm, prior) = lm_config_for(cfg, i_alpha, &cell)?;
        let result = cell.problem.lm_reconstruct(&cell.observation, &lm, Some(&cell.truth))?;
        Ok((result, cell.truth, lm.t_init, prior))
    };
    match attempt() {
        Ok((result, truth, t0, prior)) => {
            row.e = l2_error(&result.v_hat, &truth).unwrap_or(f64::NAN);
            row.k_star = Some(result.k_star);
            row.t_hat = result.t_hat;
            row.t_init = t0;
            row.t_init_from_prior = prior;
            if cfg.lm.stop == StopChoice::Discrepancy && !result.converged {
                row.note = "discrepancy level not reached".into();
            }
            CellRun { row, result: Some(result), truth: Some(truth), runtime: start.elapsed() }
        }
        Err(e) => {
            row.note = e.to_string();
            CellRun { row, result: None, truth: None, runtime: start.elapsed() }
        }
    }
}

/// Runs the whole `(α × ε)` grid in parallel; rows come out in grid order.
pub fn run_grid(cfg: &ExperimentConfig) -> Vec<CellRun> {
    let cells: Vec<(usize, usize)> =
        (0..cfg.alphas.len()).flat_map(|i| (0..cfg.epsilons.len()).map(move |j| (i, j))).collect();
    cells.par_iter().map(|&(i, j)| run_cell(cfg, i, j)).collect()
}

pub fn run_table(cfg: &ExperimentConfig) -> TableReport {
    TableReport { rows: run_grid(cfg).into_iter().map(|c| c.row).collect() }
}

/// Writes `table.csv`, `metadata.txt` and `timing.txt`.
pub fn write_table(cfg: &ExperimentConfig, runs: &[CellRun], out: &Path) -> RunResult<TableReport> {
    let report = TableReport { rows: runs.iter().map(|c| c.row.clone()).collect() };
    write_text(&out.join("table.csv"), &report.to_csv()?)?;
    write_text(&out.join("metadata.txt"), &run_metadata(cfg))?;
    let mut timing = String::from("alpha,epsilon,seconds\n");
    for c in runs {
        timing.push_str(&format!("{},{},{:.3}\n", c.row.alpha, c.row.epsilon, c.runtime.as_secs_f64()));
    }
    write_text(&out.join("timing.txt"), &timing)?;
    Ok(report)
}

fn run_metadata(cfg: &ExperimentConfig) -> String {
    format!(
        "example = {}\nalphas = {:?}\nepsilons = {:?}\nseed = {}\ncell_seed = seed + 100 * i_alpha + i_eps\nrng = {RNG_NAME}\ncells = {}\nsteps = {}\ndata_refinement = {}\nstop = {:?}\n",
        cfg.example, cfg.alphas, cfg.epsilons, cfg.seed, cfg.cells, cfg.steps, cfg.data_refinement, cfg.lm.stop,
    )
}

// ---------------------------------------------------------------- plot data

/// Writes `history_r.csv`, `history_e.csv`, `history_t.csv` (columns `k` and
/// the quantity) and, with a field, `profile.csv` with the reconstruction and
/// the truth at the nodes. An empty history gives header-only files.
pub fn emit_plot_data(out: &Path, result: Option<&ReconstructionResult>, truth: Option<&Field>) -> RunResult<()> {
    let history = result.map(|r| r.history.as_slice()).unwrap_or(&[]);
    type Series = (&'static str, &'static str, fn(&HistoryEntry) -> f64);
    let series: [Series; 3] = [
        ("history_r.csv", "k,r", |h| h.residual),
        ("history_e.csv", "k,e", |h| h.error),
        ("history_t.csv", "k,t", |h| h.t),
    ];
    for (name, header, get) in series {
        let mut text = format!("{header}\n");
        for h in history {
            text.push_str(&format!("{},{:.16e}\n", h.k, get(h)));
        }
        write_text(&out.join(name), &text)?;
    }
    if let (Some(r), Some(truth)) = (result, truth) {
        let mesh = r.v_hat.mesh();
        let mut text = String::from(if mesh.dim() == 1 { "x,v_hat,v_true\n" } else { "x,y,v_hat,v_true\n" });
        for (k, (a, b)) in r.v_hat.values().iter().zip(truth.values()).enumerate() {
            let (x, y) = mesh.coords(k);
            if mesh.dim() == 1 {
                text.push_str(&format!("{x:.10},{a:.16e},{b:.16e}\n"));
            } else {
                text.push_str(&format!("{x:.10},{y:.10},{a:.16e},{b:.16e}\n"));
            }
        }
        write_text(&out.join("profile.csv"), &text)?;
    }
    Ok(())
}

/// Table plus per-cell plot data for `recover-*`. The example must be of
/// the requested kind.
pub fn run_recover(cfg: &ExperimentConfig, kind: Kind, out: &Path) -> RunResult<TableReport> {
    if cfg.example.kind() != kind {
        return Err(
            ConfigError { line: None, message: format!("example {} is not a {kind:?} problem", cfg.example) }.into()
        );
    }
    let runs = run_grid(cfg);
    for c in &runs {
        let dir = out.join(cell_tag(c.row.alpha, c.row.epsilon));
        emit_plot_data(&dir, c.result.as_ref(), c.truth.as_ref())?;
    }
    write_table(cfg, &runs, out)
}

// ---------------------------------------------------------------- T estimate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub case: String,
    pub alpha: f64,
    pub t_hat: f64,
    pub lambda_hat: f64,
    pub note: String,
}

/// Rough initial value of the source-case estimator data.
pub fn estimator_isp_initial(x: f64, _: f64) -> f64 {
    x.min(1.0 - x)
}

/// Smooth spatial source of the source-case estimator data.
pub fn estimator_isp_psi(x: f64, _: f64) -> f64 {
    (3.0 * std::f64::consts::PI * x).sin()
}

/// Spectral data with a regularity gap (smooth unknown, rough known input),
/// solved exactly at `T = 0.5` with `modes` sine modes, and the terminal
/// time read off the ratio sequence over `window`. Orders where the ratio
/// limit degenerates (α = 1) are reported with a NaN estimate and a note.
pub fn run_estimate_t(
    case: EstimatorCase,
    alphas: &[f64],
    modes: usize,
    window: (usize, usize),
) -> RunResult<Vec<EstimateRow>> {
    let grid = Mesh::interval(4 * modes)?;
    let ed = build_eigendecomposition(&Field::zeros(grid), modes)?;
    let mut rows = Vec::new();
    for &alpha in alphas {
        let (name, spec, reference, kind) = match case {
            EstimatorCase::Backward => {
                let spec = Example::Bp1.spec(alpha);
                let f = Func::analytic(bp1_source);
                ("bp", spec, ed.coefficients(&f), EstimatorKind::Backward)
            }
            EstimatorCase::Source => {
                let u0 = Func::analytic(estimator_isp_initial);
                let spec = ProblemSpec::interval(alpha, u0.clone(), T_TRUE).with_source(Source::Separable {
                    g: TimeProfile::Constant(1.0),
                    psi: Func::analytic(estimator_isp_psi),
                });
                ("isp", spec, ed.coefficients(&u0), EstimatorKind::Source)
            }
        };
        let sol = solve_spectral(&spec, &ed, T_TRUE)?;
        let row = match estimate_t(kind, &sol.coeffs, &reference, &ed.eigenvalues, alpha, window) {
            Ok(est) => EstimateRow {
                case: name.into(),
                alpha,
                t_hat: est.t_hat,
                lambda_hat: est.lambda_hat,
                note: String::new(),
            },
            Err(e @ (subdiff_core::Error::InconsistentData(_) | subdiff_core::Error::DegenerateReference)) => {
                EstimateRow { case: name.into(), alpha, t_hat: f64::NAN, lambda_hat: f64::NAN, note: e.to_string() }
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> RunResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| RunError::Io(e.to_string()))
}

// ---------------------------------------------------------------- convergence

/// Self-convergence study of the example's forward problem for every order,
/// written to `convergence.csv` (one line per level) and `orders.csv`.
pub fn run_convergence(cfg: &ExperimentConfig, out: &Path) -> RunResult<Vec<(f64, ConvergenceReport)>> {
    let mut reports = Vec::new();
    let mut levels = String::from("alpha,kind,size,error\n");
    let mut orders = String::from("alpha,space_order,time_order\n");
    for &alpha in &cfg.alphas {
        let spec = cfg.example.spec(alpha);
        let r = convergence_study(&spec, &cfg.convergence_cells, &cfg.convergence_steps, None)?;
        for (h, e) in r.h.iter().zip(&r.space_errors) {
            levels.push_str(&format!("{alpha},h,{h:.10},{e:.6e}\n"));
        }
        for (t, e) in r.tau.iter().zip(&r.time_errors) {
            levels.push_str(&format!("{alpha},tau,{t:.10},{e:.6e}\n"));
        }
        orders.push_str(&format!("{alpha},{:.4},{:.4}\n", r.space_order, r.time_order));
        reports.push((alpha, r));
    }
    write_text(&out.join("convergence.csv"), &levels)?;
    write_text(&out.join("orders.csv"), &orders)?;
    Ok(reports)
}

/// Writes `text` to `out/name`, or to stdout without an output directory.
pub fn emit(out: Option<&Path>, name: &str, text: &str) -> RunResult<()> {
    match out {
        Some(dir) => write_text(&dir.join(name), text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
