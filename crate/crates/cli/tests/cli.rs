use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use subdiff_core::inverse::Kind;
use subdiff_experiments::config::{EstimatorCase, ExperimentConfig};
use subdiff_experiments::examples::{self, Example};
use subdiff_experiments::runs::{self, emit_plot_data, run_cell, run_estimate_t, run_forward, run_table};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subdiff"))
}

fn small(example: &str, extra: &str) -> ExperimentConfig {
    let text = format!("[experiment]\nexample = \"{example}\"\n{extra}");
    ExperimentConfig::parse(&text).unwrap()
}

fn read_csv_column(path: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn example_fields_match_their_formulas() {
    assert_eq!(examples::bp1_initial(0.5, 0.0), 1.0);
    assert!((examples::isp1_psi(1.0 / 6.0, 0.0) - 1.0).abs() < 1e-15);
    assert_eq!(examples::ipp_potential(0.5, 0.0), 1.0);
    assert_eq!(examples::bp1_source(0.3, 0.0), 0.3);
    assert!((examples::square_initial(0.5, 0.5) - 1.0).abs() < 1e-15);
    assert!((examples::ipp_source(0.25, 0.0) - 1.0).abs() < 1e-15);
    assert!((examples::isp2_psi(0.5, 0.25) - 0.5f64.exp()).abs() < 1e-15);
    // nodal samples on the default mesh
    for ex in Example::ALL {
        let spec = ex.spec(0.5);
        let mesh = spec.mesh(ex.default_mesh().0).unwrap();
        let v = ex.truth().sample(mesh);
        let (x, y) = mesh.coords(mesh.n_nodes() / 2);
        let formula = match ex {
            Example::Bp1 => (PI * x).sin(),
            Example::Bp2 => (PI * x).sin() * (PI * y).sin(),
            Example::Isp1 => (3.0 * PI * x).sin(),
            Example::Isp2 => 4.0 * x * (1.0 - x) * x.exp() * (2.0 * PI * y).sin(),
            Example::Ipp => (PI * x).sin().powi(4),
        };
        assert_eq!(v.values()[mesh.n_nodes() / 2], formula, "{ex}");
        assert_eq!(ex.to_string().parse::<Example>().unwrap(), ex);
    }
}

#[test]
fn forward_run_is_bounded_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("5.1i", "alphas = [0.5]\n[mesh]\ncells = 64\nsteps = 64\n");
    let s = run_forward(&cfg, &dir.path().join("a")).unwrap();
    assert!(s[0].sup_norm <= 1.0 && s[0].sup_norm > 0.0);
    run_forward(&cfg, &dir.path().join("b")).unwrap();
    for name in ["snapshot.csv", "observation.csv", "metadata.txt"] {
        let a = fs::read(dir.path().join("a/a0.5").join(name)).unwrap();
        let b = fs::read(dir.path().join("b/a0.5").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    // no noise: the observation is the snapshot
    let snap = fs::read(dir.path().join("a/a0.5/snapshot.csv")).unwrap();
    let obs = fs::read(dir.path().join("a/a0.5/observation.csv")).unwrap();
    assert_eq!(snap, obs);
    let meta = fs::read_to_string(dir.path().join("a/a0.5/metadata.txt")).unwrap();
    assert!(meta.contains("ChaCha8Rng") && meta.contains("seed = "));
}

#[test]
fn single_cell_table_and_determinism() {
    let cfg = small(
        "5.2i",
        "alphas = [0.5]\nepsilons = [1e-2]\n[mesh]\ncells = 32\nsteps = 32\ndata_refinement = 2\n[lm]\nmax_iter = 6\n",
    );
    let a = run_table(&cfg);
    assert_eq!(a.rows.len(), 1);
    let row = &a.rows[0];
    assert!(row.e.is_finite() && row.t_hat.is_finite() && row.note.is_empty(), "{row:?}");
    let b = run_table(&cfg);
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    let csv = a.to_csv().unwrap();
    assert!(csv.starts_with("case,alpha,epsilon,seed,e,k_star,t_hat"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn failing_cell_is_recorded_in_row() {
    // starting T below the difference step is refused by the iteration settings
    let mut cfg = small("5.1i", "[mesh]\ncells = 16\nsteps = 8\n[lm]\nt_init = 0.01\n");
    cfg.lm.delta_t = 0.02;
    let run = run_cell(&cfg, 0, 0);
    assert!(run.result.is_none());
    assert!(run.row.e.is_nan() && run.row.k_star.is_none());
    assert!(!run.row.note.is_empty());
}

#[test]
fn plot_data_series_and_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("5.1i", "[mesh]\ncells = 32\nsteps = 32\ndata_refinement = 2\n[lm]\nmax_iter = 5\n");
    let run = run_cell(&cfg, 0, 0);
    emit_plot_data(dir.path(), run.result.as_ref(), run.truth.as_ref()).unwrap();
    let counts: Vec<usize> = ["history_r.csv", "history_e.csv", "history_t.csv"]
        .iter()
        .map(|n| fs::read_to_string(dir.path().join(n)).unwrap().lines().count())
        .collect();
    assert_eq!(counts, vec![7, 7, 7]);
    assert_eq!(fs::read_to_string(dir.path().join("profile.csv")).unwrap().lines().count(), 34);

    let empty = tempfile::tempdir().unwrap();
    emit_plot_data(empty.path(), None, None).unwrap();
    assert_eq!(fs::read_to_string(empty.path().join("history_r.csv")).unwrap(), "k,r\n");
    assert!(!empty.path().join("profile.csv").exists());
}

#[test]
fn potential_profile_is_close_to_the_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("5.3", "alphas = [0.5]\n");
    runs::run_recover(&cfg, Kind::Potential, dir.path()).unwrap();
    let p = dir.path().join("a0.5_e0/profile.csv");
    let got = read_csv_column(&p, 1);
    let want = read_csv_column(&p, 2);
    let worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 5e-2, "{worst}");
    assert!(dir.path().join("table.csv").exists());
}

#[test]
fn estimator_runs_and_control() {
    let rows = run_estimate_t(EstimatorCase::Source, &[0.5, 1.0], 200, (50, 200)).unwrap();
    assert!((rows[0].t_hat - 0.5).abs() <= 1e-2);
    assert!(rows[1].t_hat.is_nan() && rows[1].note.contains("inconsistent"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[experiment]\nexample = \"5.1i\"\n\n[lm]\nstop = \"sometimes\"\n").unwrap();
    let out = bin().args(["table", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));

    let out = bin().args(["table", "--config"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let wrong = dir.path().join("wrong.toml");
    fs::write(&wrong, "[experiment]\nexample = \"5.2i\"\n").unwrap();
    let out = bin().args(["recover-bp", "--config"]).arg(&wrong).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // the estimator degenerates for every order: numerical failure
    let degen = dir.path().join("degen.toml");
    fs::write(&degen, "[experiment]\nexample = \"5.1i\"\nalphas = [1.0]\n[estimator]\nmodes = 100\n").unwrap();
    let out = bin().args(["estimate-t", "--config"]).arg(&degen).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = bin().args(["ml-eval", "--alpha", "0.5", "--", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let v: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 0.427_583_576_155_807).abs() < 1e-12);
}

#[test]
fn forward_subcommand_with_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("f.toml");
    fs::write(&cfg, "[experiment]\nexample = \"5.3\"\nepsilons = [1e-2]\n[mesh]\ncells = 20\nsteps = 10\n").unwrap();
    let run = |seed: &str, out: &str| {
        let st = bin()
            .args(["forward", "--threads", "1", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(st.success());
        fs::read(dir.path().join(out).join("a0.5/observation.csv")).unwrap()
    };
    assert_eq!(run("7", "x"), run("7", "y"));
    assert_ne!(run("7", "x"), run("8", "z"));
}
