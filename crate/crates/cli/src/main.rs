use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subdiff_core::inverse::Kind;
use subdiff_core::mittag_leffler::{ml_eval, MLParams};
use subdiff_experiments::config::{ConfigError, ExperimentConfig};
use subdiff_experiments::runs::{self, RunError, RunResult};

#[derive(Parser)]
#[command(name = "subdiff", version, about = "Subdiffusion reconstructions with unknown terminal time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `experiment.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel grid cells.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve and noisy observation of an example.
    Forward(Common),
    /// Terminal-time estimate from synthetic spectral data.
    EstimateT(Common),
    /// Backward problem: recover u0 and T.
    RecoverBp(Common),
    /// Source problem: recover psi and T.
    RecoverIsp(Common),
    /// Potential problem: recover q and T.
    RecoverIpp(Common),
    /// Error / stopping index / T table over the alpha x epsilon grid.
    Table(Common),
    /// Space and time self-convergence of the forward solver.
    Convergence(Common),
    /// Evaluate E_{alpha,beta}(z).
    MlEval {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Arguments z (negative reals, or |z| <= 1).
        #[arg(required = true, allow_negative_numbers = true)]
        z: Vec<f64>,
    },
}

fn load(common: &Common) -> RunResult<ExperimentConfig> {
    let path =
        common.config.as_ref().ok_or_else(|| ConfigError { line: None, message: "--config is required".into() })?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(n) = common.threads {
        // the global pool can only be built once; later calls keep the first size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn recover(common: &Common, kind: Kind) -> RunResult<()> {
    let cfg = load(common)?;
    let out = out_dir(&cfg);
    let report = runs::run_recover(&cfg, kind, &out)?;
    print!("{}", report.to_csv()?);
    Ok(())
}

fn run(cli: Cli) -> RunResult<()> {
    match cli.command {
        Command::Forward(c) => {
            let cfg = load(&c)?;
            let out = out_dir(&cfg);
            for s in runs::run_forward(&cfg, &out)? {
                println!("alpha {}: sup|u(T)| = {:.6e} ({:.2?})", s.alpha, s.sup_norm, s.runtime);
            }
            println!("wrote {}", out.display());
        }
        Command::EstimateT(c) => {
            let cfg = load(&c)?;
            let rows =
                runs::run_estimate_t(cfg.estimator_case, &cfg.alphas, cfg.estimator_modes, cfg.estimator_window)?;
            let text = runs::rows_to_csv(&rows)?;
            runs::emit(cfg.out.as_deref(), "estimate_t.csv", &text)?;
            if cfg.out.is_some() {
                print!("{text}");
            }
            if rows.iter().all(|r| r.t_hat.is_nan()) {
                return Err(RunError::Numerical(subdiff_core::Error::DegenerateReference));
            }
        }
        Command::RecoverBp(c) => recover(&c, Kind::Backward)?,
        Command::RecoverIsp(c) => recover(&c, Kind::Source)?,
        Command::RecoverIpp(c) => recover(&c, Kind::Potential)?,
        Command::Table(c) => {
            let cfg = load(&c)?;
            let grid = runs::run_grid(&cfg);
            let report = match &cfg.out {
                Some(out) => runs::write_table(&cfg, &grid, out)?,
                None => runs::TableReport { rows: grid.into_iter().map(|c| c.row).collect() },
            };
            print!("{}", report.to_csv()?);
        }
        Command::Convergence(c) => {
            let cfg = load(&c)?;
            let out = out_dir(&cfg);
            for (alpha, r) in runs::run_convergence(&cfg, &out)? {
                println!("alpha {alpha}: space order {:.3}, time order {:.3}", r.space_order, r.time_order);
            }
        }
        Command::MlEval { alpha, beta, z } => {
            let p = MLParams::new(alpha, beta).map_err(|e| ConfigError { line: None, message: e.to_string() })?;
            println!("z,value");
            for z in z {
                println!("{z},{:.16e}", ml_eval(p, z)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
