//! Built-in experiment definitions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use subdiff_core::field::{Func, TimeProfile};
use subdiff_core::inverse::Kind;
use subdiff_core::problem::{ProblemSpec, Source};

/// Terminal time of every built-in example.
pub const T_TRUE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    /// Backward problem on the interval.
    Bp1,
    /// Backward problem on the square with variable diffusion.
    Bp2,
    /// Source problem on the interval.
    Isp1,
    /// Source problem on the square with variable diffusion.
    Isp2,
    /// Potential problem on the interval.
    Ipp,
}

impl FromStr for Example {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "5.1i" => Ok(Example::Bp1),
            "5.1ii" => Ok(Example::Bp2),
            "5.2i" => Ok(Example::Isp1),
            "5.2ii" => Ok(Example::Isp2),
            "5.3" => Ok(Example::Ipp),
            other => Err(format!("unknown example `{other}` (expected 5.1i, 5.1ii, 5.2i, 5.2ii or 5.3)")),
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Example::Bp1 => "5.1i",
            Example::Bp2 => "5.1ii",
            Example::Isp1 => "5.2i",
            Example::Isp2 => "5.2ii",
            Example::Ipp => "5.3",
        })
    }
}

/// Default regularization schedule of one example at one order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmDefaults {
    pub gamma0: f64,
    pub mu0: f64,
    pub rho: f64,
    pub max_iter: usize,
}

fn variable_diffusion() -> Func {
    Func::analytic(|x, y| 1.0 + (PI * x).sin() * y * (1.0 - y))
}

pub fn bp1_initial(x: f64, _: f64) -> f64 {
    (PI * x).sin()
}

pub fn bp1_source(x: f64, _: f64) -> f64 {
    x.min(1.0 - x)
}

pub fn square_initial(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

pub fn bp2_source(x: f64, y: f64) -> f64 {
    x.min(1.0 - x) * x.exp() * (2.0 * PI * y).sin()
}

pub fn isp1_initial(x: f64, _: f64) -> f64 {
    (2.0 * PI * x).sin()
}

pub fn isp1_psi(x: f64, _: f64) -> f64 {
    (3.0 * PI * x).sin()
}

pub fn isp2_psi(x: f64, y: f64) -> f64 {
    4.0 * x * (1.0 - x) * x.exp() * (2.0 * PI * y).sin()
}

pub fn ipp_source(x: f64, _: f64) -> f64 {
    (2.0 * PI * x).sin().abs()
}

pub fn ipp_potential(x: f64, _: f64) -> f64 {
    (PI * x).sin().powi(4)
}

impl Example {
    pub const ALL: [Example; 5] = [Example::Bp1, Example::Bp2, Example::Isp1, Example::Isp2, Example::Ipp];

    pub fn kind(self) -> Kind {
        match self {
            Example::Bp1 | Example::Bp2 => Kind::Backward,
            Example::Isp1 | Example::Isp2 => Kind::Source,
            Example::Ipp => Kind::Potential,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Example::Bp2 | Example::Isp2 => 2,
            _ => 1,
        }
    }

    /// Full forward problem with the true parameter and `T = 0.5`.
    pub fn spec(self, alpha: f64) -> ProblemSpec {
        match self {
            Example::Bp1 => ProblemSpec::interval(alpha, Func::analytic(bp1_initial), T_TRUE)
                .with_source(Source::Steady(Func::analytic(bp1_source))),
            Example::Bp2 => ProblemSpec::interval(alpha, Func::analytic(square_initial), T_TRUE)
                .on_square()
                .with_diffusion(variable_diffusion())
                .with_source(Source::Steady(Func::analytic(bp2_source))),
            Example::Isp1 => ProblemSpec::interval(alpha, Func::analytic(isp1_initial), T_TRUE)
                .with_source(Source::Separable { g: TimeProfile::Constant(1.0), psi: Func::analytic(isp1_psi) }),
            Example::Isp2 => ProblemSpec::interval(alpha, Func::analytic(square_initial), T_TRUE)
                .on_square()
                .with_diffusion(variable_diffusion())
                .with_source(Source::Separable { g: TimeProfile::Constant(1.0), psi: Func::analytic(isp2_psi) }),
            Example::Ipp => ProblemSpec::interval(alpha, Func::Const(1.0), T_TRUE)
                .with_source(Source::Steady(Func::analytic(ipp_source)))
                .with_potential(Func::analytic(ipp_potential)),
        }
    }

    /// The unknown of the example.
    pub fn truth(self) -> Func {
        match self {
            Example::Bp1 => Func::analytic(bp1_initial),
            Example::Bp2 => Func::analytic(square_initial),
            Example::Isp1 => Func::analytic(isp1_psi),
            Example::Isp2 => Func::analytic(isp2_psi),
            Example::Ipp => Func::analytic(ipp_potential),
        }
    }

    /// Regularization schedule printed with the tables; orders other than
    /// 0.25, 0.5, 0.75 take the value of the nearest printed order.
    pub fn lm_defaults(self, alpha: f64) -> LmDefaults {
        let pick = |v: [f64; 3]| {
            let i = [0.25, 0.5, 0.75]
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - alpha).abs().total_cmp(&(b.1 - alpha).abs()))
                .map(|(i, _)| i)
                .unwrap_or(1);
            v[i]
        };
        match self {
            Example::Bp1 => LmDefaults { gamma0: 1e-2, mu0: pick([2.7e-3, 6.3e-3, 1.3e-2]), rho: 0.8, max_iter: 40 },
            Example::Bp2 => LmDefaults { gamma0: 1e-3, mu0: pick([1.1e-4, 2.7e-4, 6e-4]), rho: 0.8, max_iter: 40 },
            Example::Isp1 => LmDefaults { gamma0: 1e-4, mu0: pick([1e-8, 5e-8, 1e-7]), rho: 0.8, max_iter: 30 },
            Example::Isp2 => LmDefaults { gamma0: 1e-4, mu0: 1e-9, rho: 0.8, max_iter: 30 },
            Example::Ipp => LmDefaults { gamma0: 1e-7, mu0: 1e-8, rho: 0.5, max_iter: 20 },
        }
    }

    /// Default `(cells, steps, data refinement factor)`.
    pub fn default_mesh(self) -> (usize, usize, usize) {
        match self.dim() {
            1 => (100, 100, 4),
            _ => (16, 32, 2),
        }
    }
}
