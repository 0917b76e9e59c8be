//! Two-parameter Mittag-Leffler function on the non-positive real axis.
//!
//! `E_{α,β}(z) = Σ_k z^k / Γ(αk + β)` is evaluated with three branches:
//!
//! * `|z| ≤ SERIES_RADIUS` (and `0 < z ≤ Z_MAX_POSITIVE`): the power series with
//!   Neumaier-compensated summation;
//! * `SERIES_RADIUS < -z < ASYMPTOTIC_RADIUS`: the real integral obtained by
//!   collapsing the Laplace inversion contour of `s^{α-β}/(s^α + x)` onto the
//!   branch cut, in the variable `u = r^α`,
//!
//!   ```text
//!   E_{α,β}(-x) = 1/(απ) ∫_0^∞ e^{-u^{1/α}} u^{(1-β)/α}
//!                 (u sin βπ + x sin (β-α)π) / (u² + 2xu cos απ + x²) du,
//!   ```
//!
//!   integrated by adaptive tanh-sinh;
//! * `-z ≥ ASYMPTOTIC_RADIUS`: the algebraic expansion
//!   `E_{α,β}(z) = -Σ_{k=1}^N z^{-k} / Γ(β - αk) + O(|z|^{-N-1})`.
//!
//! The expansion is often printed with `1/z` inside the sum for every `k`; the
//! correct power is `z^{-k}`, which is what is implemented here.
//!
//! For `α = 1` only `β = 1` is supported outside the series disc (`E_{1,1} = exp`).

use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Radius of the power-series branch.
pub const SERIES_RADIUS: f64 = 1.0;
/// Largest positive argument accepted (series only).
pub const Z_MAX_POSITIVE: f64 = 1.0;
/// Beyond this `|z|` the asymptotic expansion is used.
pub const ASYMPTOTIC_RADIUS: f64 = 1.0e3;
/// Number of terms of the asymptotic expansion.
pub const ASYMPTOTIC_TERMS: usize = 8;

/// Order and second parameter of `E_{α,β}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MLParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Parameter(format!("alpha = {} not in (0, 1]", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Parameter(format!("beta = {} must be positive", self.beta)));
        }
        Ok(())
    }
}

/// Branch selected for an argument; exposed for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Series,
    Integral,
    Asymptotic,
    Exponential,
}

/// `1/Γ(x)`, exactly zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if x == x.round() {
        if x <= 0.0 {
            return 0.0;
        }
        if x <= 20.0 {
            // exact factorial
            let n = x as u64;
            return 1.0 / (1..n).product::<u64>() as f64;
        }
    }
    1.0 / gamma(x)
}

/// Evaluates `E_{α,β}(z)`.
pub fn ml_eval(p: MLParams, z: f64) -> Result<f64> {
    p.validate()?;
    let branch = select_branch(p, z)?;
    Ok(eval_branch(p, z, branch))
}

/// Shorthand for the two functions the solvers need; panics only on invalid `alpha`.
pub fn ml(alpha: f64, beta: f64, z: f64) -> f64 {
    ml_eval(MLParams { alpha, beta }, z).expect("Mittag-Leffler argument out of range")
}

pub fn select_branch(p: MLParams, z: f64) -> Result<Branch> {
    if z.is_nan() {
        return Err(Error::Domain("z is NaN".into()));
    }
    if z > Z_MAX_POSITIVE {
        return Err(Error::Domain(format!("z = {z} exceeds the positive cutoff {Z_MAX_POSITIVE}")));
    }
    if p.alpha == 1.0 && p.beta == 1.0 {
        return Ok(Branch::Exponential);
    }
    let x = -z;
    if x <= SERIES_RADIUS {
        return Ok(Branch::Series);
    }
    if p.alpha == 1.0 {
        return Err(Error::Domain(format!(
            "alpha = 1 with beta = {} is only supported for |z| <= {SERIES_RADIUS}",
            p.beta
        )));
    }
    if x >= ASYMPTOTIC_RADIUS {
        return Ok(Branch::Asymptotic);
    }
    if p.beta >= 1.0 + p.alpha {
        return Err(Error::Domain(format!(
            "beta = {} >= 1 + alpha is not supported for |z| > {SERIES_RADIUS}",
            p.beta
        )));
    }
    Ok(Branch::Integral)
}

/// Evaluates a specific branch regardless of the default switching radii.
pub fn eval_branch(p: MLParams, z: f64, branch: Branch) -> f64 {
    match branch {
        Branch::Exponential => z.exp(),
        Branch::Series => series(p, z),
        Branch::Integral => integral(p, -z),
        Branch::Asymptotic => asymptotic(p, z, ASYMPTOTIC_TERMS),
    }
}

fn series(p: MLParams, z: f64) -> f64 {
    // Neumaier summation
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut zk = 1.0f64;
    let mut quiet = 0;
    for k in 0..2000 {
        let term = zk * rgamma(p.alpha * k as f64 + p.beta);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if term.abs() <= 1e-18 * (sum + comp).abs().max(1e-300) {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        zk *= z;
        if zk == 0.0 {
            break;
        }
    }
    sum + comp
}

fn asymptotic(p: MLParams, z: f64, terms: usize) -> f64 {
    let mut sum = 0.0;
    let mut zk = 1.0;
    for k in 1..=terms {
        zk /= z;
        sum -= zk * rgamma(p.beta - p.alpha * k as f64);
    }
    sum
}

fn integral(p: MLParams, x: f64) -> f64 {
    let MLParams { alpha, beta } = p;
    let c = (alpha * PI).cos();
    let sin_b = (beta * PI).sin();
    let sin_ba = ((beta - alpha) * PI).sin();
    let inv_a = 1.0 / alpha;
    let expo = (1.0 - beta) * inv_a;
    let f = |u: f64| -> f64 {
        let den = u * u + 2.0 * x * u * c + x * x;
        let pow = if expo == 0.0 { 1.0 } else { u.powf(expo) };
        (-u.powf(inv_a)).exp() * pow * (u * sin_b + x * sin_ba) / den
    };
    // e^{-u^{1/α}} < 1e-20 beyond u_max
    let u_max = 46.0f64.powf(alpha);
    let peak = -x * c;
    let tol = 1e-13;
    let total = if peak > 0.0 && peak < u_max {
        tanh_sinh(0.0, peak, tol, f) + tanh_sinh(peak, u_max, tol, f)
    } else {
        tanh_sinh(0.0, u_max, tol, f)
    };
    total * inv_a / PI
}

/// Calibrated constants `(c0, c1)` with `c0/(1+x) ≤ E_{α,1}(-x) ≤ c1/(1+x)` on a
/// log-spaced coarse grid of `x ∈ [0, 1e8]`, padded by 1%.
pub fn calibrate_bound_constants(alpha: f64) -> Result<(f64, f64)> {
    let p = MLParams::new(alpha, 1.0)?;
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    for i in 0..=80 {
        let x = 10f64.powf(-3.0 + 11.0 * i as f64 / 80.0);
        let v = ml_eval(p, -x)? * (1.0 + x);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((0.99 * lo, 1.01 * hi))
}

/// Checks the two-sided bound `c0/(1+x) ≤ E_{α,1}(-x) ≤ c1/(1+x)` with constants
/// calibrated by [`calibrate_bound_constants`].
pub fn ml_e1_bounds_check(alpha: f64, x: f64) -> Result<(bool, bool)> {
    if x < 0.0 {
        return Err(Error::Domain(format!("x = {x} must be non-negative")));
    }
    let (c0, c1) = calibrate_bound_constants(alpha)?;
    let v = ml_eval(MLParams::new(alpha, 1.0)?, -x)?;
    Ok((c0 / (1.0 + x) <= v, v <= c1 / (1.0 + x)))
}

/// `|D_h E_{α,1}(-λt^α) + λ t^{α-1} E_{α,α}(-λt^α)|`, with `D_h` the centered
/// difference in `t`.
pub fn ml_derivative_identity_residual(alpha: f64, lambda: f64, t: f64, h: f64) -> Result<f64> {
    if !(t - h > 0.0) {
        return Err(Error::Domain(format!("t - h = {} must be positive", t - h)));
    }
    let e1 = MLParams::new(alpha, 1.0)?;
    let ea = MLParams::new(alpha, alpha)?;
    let fwd = ml_eval(e1, -lambda * (t + h).powf(alpha))?;
    let bwd = ml_eval(e1, -lambda * (t - h).powf(alpha))?;
    let fd = (fwd - bwd) / (2.0 * h);
    let exact = -lambda * t.powf(alpha - 1.0) * ml_eval(ea, -lambda * t.powf(alpha))?;
    Ok((fd - exact).abs())
}
