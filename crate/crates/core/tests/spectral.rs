use std::f64::consts::PI;

use proptest::prelude::*;
use subdiff_core::fem::{l2_distance, l2_norm, solve_fem, TimeGrid};
use subdiff_core::field::{Field, Func};
use subdiff_core::mesh::Mesh;
use subdiff_core::mittag_leffler::ml;
use subdiff_core::problem::{Dirichlet, ProblemSpec, Source};
use subdiff_core::spectral::*;
use subdiff_core::Error;

fn sin4(x: f64) -> f64 {
    (PI * x).sin().powi(4)
}

// y'' = (q - λ) y, y(0) = 0, y'(0) = 1, classical RK4; returns y(1).
fn shoot(lambda: f64, steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    let rhs = |x: f64, y: f64, p: f64| (p, (sin4(x) - lambda) * y);
    let (mut y, mut p) = (0.0, 1.0);
    for i in 0..steps {
        let x = i as f64 * h;
        let k1 = rhs(x, y, p);
        let k2 = rhs(x + 0.5 * h, y + 0.5 * h * k1.0, p + 0.5 * h * k1.1);
        let k3 = rhs(x + 0.5 * h, y + 0.5 * h * k2.0, p + 0.5 * h * k2.1);
        let k4 = rhs(x + h, y + h * k3.0, p + h * k3.1);
        y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        p += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    y
}

fn shooting_eigenvalue(n: usize) -> f64 {
    let base = (n as f64 * PI).powi(2);
    let (mut lo, mut hi) = (base - 0.5, base + 1.5);
    let steps = 20_000;
    let flo = shoot(lo, steps);
    assert!(flo * shoot(hi, steps) < 0.0, "bracket fails for mode {n}");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if shoot(mid, steps) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn sin4_potential_matches_shooting_oracle() {
    let mut prev_err = f64::INFINITY;
    for cells in [128, 512] {
        let q = Field::from_fn(Mesh::interval(cells).unwrap(), |x, _| sin4(x));
        let ed = build_eigendecomposition(&q, 10).unwrap();
        let mut worst: f64 = 0.0;
        for n in 1..=10 {
            let shift = ed.eigenvalues[n - 1] - (n as f64 * PI).powi(2);
            assert!((0.0..=1.0).contains(&shift), "mode {n} shift {shift}");
            worst = worst.max((ed.eigenvalues[n - 1] - shooting_eigenvalue(n)).abs());
        }
        assert!(worst < prev_err, "no convergence under refinement: {worst} vs {prev_err}");
        prev_err = worst;
        assert!(ed.shift_bound <= 1.0);
    }
    assert!(prev_err < 1e-6, "fine-grid eigenvalue error {prev_err}");
}

#[test]
fn eigenvectors_are_orthonormal() {
    let q = Field::from_fn(Mesh::interval(400).unwrap(), |x, _| sin4(x));
    let ed = build_eigendecomposition(&q, 20).unwrap();
    let h = ed.grid.h();
    for i in 0..20 {
        for j in 0..=i {
            let a = ed.eigenvector(i);
            let b = ed.eigenvector(j);
            let d: f64 = h * a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>();
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((d - target).abs() <= 1e-8, "({i},{j}) = {d}");
        }
    }
}

#[test]
fn apply_f_examples() {
    let mesh = Mesh::interval(256).unwrap();
    let ed = build_eigendecomposition(&Field::zeros(mesh), 64).unwrap();
    let v = Func::analytic(|x, _| (PI * x).sin());
    let c = ed.coefficients(&v);
    assert_eq!(apply_f(&ed, 0.5, 0.0, &c), c);
    let out = apply_f(&ed, 0.5, 0.5, &c);
    let factor = ml(0.5, 1.0, -PI * PI * 0.5f64.sqrt());
    let expect = factor / std::f64::consts::SQRT_2;
    assert!((out[0] - expect).abs() < 1e-12);
    assert!(out[1..].iter().all(|x| x.abs() < 1e-12));
    let far = apply_f(&ed, 0.5, 1e6, &c);
    let sup = ed.synthesize(&far, mesh).max_abs();
    let bound = 2.0 / (statrs::function::gamma::gamma(0.5) * PI * PI * 1e3);
    assert!(sup <= bound, "{sup} > {bound}");
}

#[test]
fn solve_spectral_single_mode_and_steady_state() {
    let mesh = Mesh::interval(256).unwrap();
    let ed = build_eigendecomposition(&Field::zeros(mesh), 32).unwrap();
    let spec = ProblemSpec::interval(0.5, Func::analytic(|x, _| (PI * x).sin()), 0.25);
    let sol = solve_spectral(&spec, &ed, 0.25).unwrap();
    let e = ml(0.5, 1.0, -PI * PI * 0.25f64.sqrt());
    assert!((sol.coeffs[0] - e / std::f64::consts::SQRT_2).abs() < 1e-12);
    assert!(sol.warning.is_none());

    let steady = ProblemSpec::interval(0.7, Func::Const(0.0), 1e12)
        .with_source(Source::Steady(Func::analytic(|x, _| (PI * x).sin())));
    let sol = solve_spectral(&steady, &ed, 1e12).unwrap();
    assert!((sol.coeffs[0] - 1.0 / (PI * PI * std::f64::consts::SQRT_2)).abs() < 1e-8);
}

#[test]
fn rough_input_gets_truncation_warning() {
    let mesh = Mesh::interval(256).unwrap();
    let ed = build_eigendecomposition(&Field::zeros(mesh), 8).unwrap();
    let spec = ProblemSpec::interval(0.5, Func::Const(1.0), 0.5);
    let sol = solve_spectral(&spec, &ed, 0.5).unwrap();
    assert!(sol.warning.is_some());
}

#[test]
fn spectral_matches_fem_on_example_data() {
    let alpha = 0.5;
    let spec = ProblemSpec::interval(alpha, Func::analytic(|x, _| (PI * x).sin()), 0.5)
        .with_source(Source::Steady(Func::analytic(|x, _| x.min(1.0 - x))));
    let fine = Mesh::interval(1024).unwrap();
    let ed = build_eigendecomposition(&Field::zeros(fine), 200).unwrap();
    let sol = solve_spectral(&spec, &ed, 0.5).unwrap();
    let mesh = Mesh::interval(512).unwrap();
    let traj = solve_fem(&spec, mesh, &TimeGrid::new(1024, 0.5).unwrap()).unwrap();
    let reference = ed.synthesize(&sol.coeffs, mesh);
    let gap = l2_norm(&traj.last().sub(&reference).unwrap());
    assert!(gap <= 2e-4, "FEM/spectral gap {gap}");
}

#[test]
fn ipp_free_lift_is_affine_and_initial_state_recovered() {
    let grid = Mesh::interval(512).unwrap();
    let ed = build_eigendecomposition(&Field::zeros(grid), 128).unwrap();
    let phi = phi_q(&Field::zeros(grid), 1.0, 3.0).unwrap();
    for (k, v) in phi.values().iter().enumerate() {
        let x = grid.coords(k).0;
        assert!((v - (1.0 + 2.0 * x)).abs() < 1e-12);
    }
    let u0 = |x: f64| 1.0 + 2.0 * x + (PI * x).sin();
    let spec = ProblemSpec::interval(0.5, Func::analytic(move |x, _| u0(x)), 0.5)
        .with_dirichlet(Dirichlet::Constants(1.0, 3.0));
    let u = solve_spectral_ipp(&spec, &ed, 0.0).unwrap();
    let exact = Field::from_fn(grid, |x, _| u0(x));
    assert!(l2_distance(&u, &exact) < 1e-10);
}

#[test]
fn ipp_long_time_reaches_boundary_value_solution() {
    let grid = Mesh::interval(1024).unwrap();
    let q = Field::from_fn(grid, |x, _| sin4(x));
    let ed = build_eigendecomposition(&q, 200).unwrap();
    let f = |x: f64| (2.0 * PI * x).sin().abs();
    let spec = ProblemSpec::interval(0.5, Func::Const(1.0), 1e16)
        .with_potential(Func::Nodal(q.clone()))
        .with_source(Source::Steady(Func::analytic(move |x, _| f(x))))
        .with_dirichlet(Dirichlet::Constants(1.0, 2.0));
    let u = solve_spectral_ipp(&spec, &ed, 1e16).unwrap();
    // steady state from the boundary-value problem by central differences
    let cells = grid.cells();
    let h2 = (cells as f64).powi(2);
    let diag: Vec<f64> = (1..cells).map(|i| 2.0 * h2 + q.values()[i]).collect();
    let off = vec![-h2; cells - 2];
    let mut rhs: Vec<f64> = (1..cells).map(|i| f(i as f64 / cells as f64)).collect();
    rhs[0] += h2;
    rhs[cells - 2] += 2.0 * h2;
    let inner = subdiff_core::linalg::solve_tridiagonal(&off, &diag, &off, &rhs).unwrap();
    let mut values = vec![1.0];
    values.extend(inner);
    values.push(2.0);
    let steady = Field::new(grid, values).unwrap();
    let gap = l2_distance(&u, &steady);
    assert!(gap <= 1e-4, "steady-state gap {gap}");
}

fn synthetic_bp(alpha: f64, t: f64, modes: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let lam: Vec<f64> = (1..=modes).map(|n| (n as f64 * PI).powi(2)).collect();
    // f = x: (f, √2 sin nπx) = √2 (−1)^{n+1} / (nπ); u₀ = sin πx
    let f: Vec<f64> =
        (1..=modes).map(|n| std::f64::consts::SQRT_2 * if n % 2 == 1 { 1.0 } else { -1.0 } / (n as f64 * PI)).collect();
    let u: Vec<f64> = lam
        .iter()
        .zip(&f)
        .enumerate()
        .map(|(k, (l, fk))| {
            let e = ml(alpha, 1.0, -l * t.powf(alpha));
            let u0 = if k == 0 { 1.0 / std::f64::consts::SQRT_2 } else { 0.0 };
            e * u0 + (1.0 - e) / l * fk
        })
        .collect();
    (u, f, lam)
}

#[test]
fn estimator_recovers_terminal_time_bp() {
    for &alpha in &[0.25, 0.5, 0.75] {
        let (u, f, lam) = synthetic_bp(alpha, 0.5, 200);
        let est = estimate_t(EstimatorKind::Backward, &u, &f, &lam, alpha, (50, 200)).unwrap();
        assert!((est.t_hat - 0.5).abs() <= 0.01, "alpha {alpha}: {}", est.t_hat);
        assert_eq!(est.per_mode_t.len(), est.ratios.len());
    }
    let (u, f, lam) = synthetic_bp(0.5, 0.5, 200);
    let est = estimate_t(EstimatorKind::Backward, &u, &f, &lam, 0.5, (50, 200)).unwrap();
    assert!((est.lambda_hat - 1.0 / (PI.sqrt() * 0.5f64.sqrt())).abs() < 1e-3);
}

#[test]
fn per_mode_spread_shrinks_with_window() {
    let (u, f, lam) = synthetic_bp(0.75, 0.5, 400);
    let spread = |lo: usize, hi: usize| {
        let est = estimate_t(EstimatorKind::Backward, &u, &f, &lam, 0.75, (lo, hi)).unwrap();
        let t: Vec<f64> = est.per_mode_t.iter().map(|p| p.1).collect();
        let m = t.iter().sum::<f64>() / t.len() as f64;
        (t.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t.len() as f64).sqrt()
    };
    assert!(spread(200, 400) < spread(20, 40));
}

#[test]
fn eigen_cache_round_trip() {
    let q = Field::from_fn(Mesh::interval(128).unwrap(), |x, _| sin4(x));
    let ed = build_eigendecomposition(&q, 8).unwrap();
    let dir = std::env::temp_dir().join(format!("subdiff-eig-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("eig.csv");
    ed.save_csv(&path).unwrap();
    let back = EigenDecomposition::load_csv(&path, &q, 8).unwrap().unwrap();
    assert_eq!(back.eigenvalues, ed.eigenvalues);
    let other = q.scale(2.0);
    assert!(EigenDecomposition::load_csv(&path, &other, 8).unwrap().is_none());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn decay_rate_of_algebraic_sequence() {
    let lam: Vec<f64> = (1..=100).map(|n| (n as f64 * PI).powi(2)).collect();
    let c: Vec<f64> = (1..=100).map(|n| 1.0 / n as f64).collect();
    let rate = decay_rate(&c, &lam).unwrap();
    assert!((rate + 0.5).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn t_lambda_map_and_mean_value_bound(alpha in 0.1f64..0.9, l1 in 0.2f64..5.0, l2 in 0.2f64..5.0) {
        let t1 = t_from_lambda(alpha, l1);
        prop_assert!((lambda_from_t(alpha, t1) - l1).abs() <= 1e-10 * l1);
        let t2 = t_from_lambda(alpha, l2);
        let g = statrs::function::gamma::gamma(1.0 - alpha);
        let bound = g.powf(-1.0 / alpha) / alpha * l1.min(l2).powf(-1.0 / alpha - 1.0) * (l1 - l2).abs();
        prop_assert!((t1 - t2).abs() <= bound * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn estimator_is_invariant_under_pair_rescaling(alpha in 0.2f64..0.8, c in 0.01f64..100.0, k in -20i32..20) {
        let (u, f, lam) = synthetic_bp(alpha, 0.5, 120);
        let scaled = |v: &[f64], s: f64| v.iter().map(|x| x * s).collect::<Vec<f64>>();
        let a = estimate_t(EstimatorKind::Backward, &u, &f, &lam, alpha, (30, 120)).unwrap();
        // power-of-two factors are exact, so the BP ratio is reproduced bit for bit
        let p = 2f64.powi(k);
        let b = estimate_t(EstimatorKind::Backward, &scaled(&u, p), &scaled(&f, p), &lam, alpha, (30, 120)).unwrap();
        prop_assert!((a.t_hat - b.t_hat).abs() <= 1e-12 * a.t_hat);
        // general factors perturb u and f by an ulp, amplified by the 1 - λu/f cancellation
        let b = estimate_t(EstimatorKind::Backward, &scaled(&u, c), &scaled(&f, c), &lam, alpha, (30, 120)).unwrap();
        prop_assert!((a.t_hat - b.t_hat).abs() <= 1e-8 * a.t_hat);
        // the ISP ratio has no cancellation
        let u0: Vec<f64> = (1..=120).map(|n| 1.0 / n as f64).collect();
        let obs: Vec<f64> = lam.iter().zip(&u0).map(|(l, c0)| ml(alpha, 1.0, -l * 0.5f64.powf(alpha)) * c0).collect();
        let a = estimate_t(EstimatorKind::Source, &obs, &u0, &lam, alpha, (30, 120)).unwrap();
        let b = estimate_t(EstimatorKind::Source, &scaled(&obs, c), &scaled(&u0, c), &lam, alpha, (30, 120)).unwrap();
        prop_assert!((a.t_hat - b.t_hat).abs() <= 1e-12 * a.t_hat);
    }

    #[test]
    fn free_decay_is_monotone_in_time(alpha in 0.1f64..0.95, t1 in 0.0f64..2.0, dt in 0.0f64..2.0) {
        let mesh = Mesh::interval(64).unwrap();
        let ed = build_eigendecomposition(&Field::zeros(mesh), 16).unwrap();
        let c: Vec<f64> = (1..=16).map(|n| 1.0 / n as f64).collect();
        let norm = |t: f64| apply_f(&ed, alpha, t, &c).iter().map(|v| v * v).sum::<f64>();
        prop_assert!(norm(t1 + dt) <= norm(t1) * (1.0 + 1e-14));
    }
}

#[test]
fn window_errors() {
    let (u, f, lam) = synthetic_bp(0.5, 0.5, 50);
    assert!(matches!(estimate_t(EstimatorKind::Backward, &u, &f, &lam, 0.5, (10, 60)), Err(Error::Parameter(_))));
}
