use proptest::prelude::*;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;
use subdiff_core::mittag_leffler::*;

#[test]
fn half_order_matches_erfc() {
    // E_{1/2,1}(-x) = exp(x²) erfc(x); statrs erfc is good to ~1e-10 relative
    for x in [0.1f64, 0.7, 1.5, 3.0, 5.0, 12.0] {
        let exact = (x * x).exp() * erfc(x);
        let got = ml(0.5, 1.0, -x);
        assert!(((got - exact) / exact).abs() < 1e-9, "x = {x}: {got} vs {exact}");
    }
}

#[test]
fn branches_agree_on_their_overlaps() {
    for &alpha in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        for &beta in &[1.0, alpha] {
            let p = MLParams::new(alpha, beta).unwrap();
            // the series loses digits to cancellation once |x|^k/Γ(αk+β) peaks high
            let top = if alpha < 0.3 {
                1.1
            } else if alpha < 0.5 {
                1.5
            } else {
                2.0
            };
            for i in 0..=20 {
                let x = 0.5 + (top - 0.5) * i as f64 / 20.0;
                let s = eval_branch(p, -x, Branch::Series);
                let q = eval_branch(p, -x, Branch::Integral);
                assert!((s - q).abs() <= 1e-9, "a={alpha} b={beta} x={x}: {s} {q}");
            }
            for i in 0..=20 {
                let x = 500.0 + 1500.0 * i as f64 / 20.0;
                let q = eval_branch(p, -x, Branch::Integral);
                let a = eval_branch(p, -x, Branch::Asymptotic);
                assert!((a - q).abs() <= 1e-10 * q.abs(), "a={alpha} b={beta} x={x}: {q} {a}");
            }
        }
    }
}

#[test]
fn algebraic_tail() {
    for &alpha in &[0.25, 0.5, 0.75] {
        let x = 1e6;
        let v = x * ml(alpha, 1.0, -x) * gamma(1.0 - alpha);
        assert!((v - 1.0).abs() < 1e-3, "alpha {alpha}: {v}");
    }
    let x: f64 = 50.0;
    assert!(x * ml(1.0, 1.0, -x) < 1e-6);
}

#[test]
fn terminal_time_limit_at_high_mode() {
    let t: f64 = 0.5;
    let lam = (200.0 * std::f64::consts::PI).powi(2);
    for &alpha in &[0.25, 0.5, 0.75] {
        let v = lam * ml(alpha, 1.0, -lam * t.powf(alpha)) * gamma(1.0 - alpha) * t.powf(alpha);
        assert!((v - 1.0).abs() <= 1e-2, "alpha {alpha}: {v}");
    }
}

#[test]
fn derivative_identity_second_order() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let hs = [1e-3, 5e-4, 2.5e-4];
    for _ in 0..20 {
        let alpha = rng.random_range(0.15..0.95);
        let lambda = rng.random_range(1.0..100.0);
        let t = rng.random_range(0.2..1.0);
        let r: Vec<f64> = hs.iter().map(|&h| ml_derivative_identity_residual(alpha, lambda, t, h).unwrap()).collect();
        let slope = subdiff_core::fem::loglog_slope(&hs, &r);
        assert!(slope >= 1.8, "alpha {alpha} lambda {lambda} t {t}: {r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completely_monotone_decay(alpha in 0.05f64..0.99, x in 0.0f64..1e4, dx in 1e-3f64..10.0) {
        let a = ml(alpha, 1.0, -x);
        let b = ml(alpha, 1.0, -(x + dx));
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b < a);
    }

    #[test]
    fn kernel_is_positive(alpha in 0.05f64..0.99, x in 0.0f64..1e6) {
        prop_assert!(ml(alpha, alpha, -x) > 0.0);
    }

    #[test]
    fn two_sided_bound(alpha in 0.1f64..0.9, x in 0.0f64..1e6) {
        let (lo, hi) = ml_e1_bounds_check(alpha, x).unwrap();
        prop_assert!(lo && hi);
    }
}
