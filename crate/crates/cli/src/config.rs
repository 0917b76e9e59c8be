//! Experiment configuration files.
//!
//! A configuration is a flat TOML document with the sections `[experiment]`,
//! `[mesh]`, `[lm]`, `[estimator]` and `[convergence]`; every key is optional
//! except `experiment.example`. See `configs/README.md` for the key list.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::examples::Example;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

#[derive(Debug, Deserialize, Clone)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Deserialize, Clone)]
#[serde(untagged)]
enum RawTInit {
    Value(f64),
    Word(String),
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    example: Option<String>,
    alphas: Option<Vec<f64>>,
    epsilons: Option<Vec<f64>>,
    seed: Option<u64>,
    out: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    cells: Option<usize>,
    steps: Option<usize>,
    data_refinement: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLm {
    gamma0: Option<f64>,
    mu0: Option<OneOrMany>,
    rho: Option<f64>,
    delta_t: Option<f64>,
    max_iter: Option<usize>,
    t_init: Option<RawTInit>,
    t_fallback: Option<f64>,
    prior_window: Option<[usize; 2]>,
    stop: Option<String>,
    eta: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEstimator {
    case: Option<String>,
    modes: Option<usize>,
    window: Option<[usize; 2]>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConvergence {
    cells: Option<Vec<usize>>,
    steps: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    mesh: RawMesh,
    #[serde(default)]
    lm: RawLm,
    #[serde(default)]
    estimator: RawEstimator,
    #[serde(default)]
    convergence: RawConvergence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TInit {
    /// Fixed starting value.
    Value(f64),
    /// Estimator prior with the fallback value when the prior is unusable.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopChoice {
    BestError,
    Discrepancy,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorCase {
    /// Backward data with a smooth initial value and a rough source.
    Backward,
    /// Source data with a rough initial value and a smooth source.
    Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmSettings {
    pub gamma0: Option<f64>,
    /// Either one value or one per order.
    pub mu0: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub delta_t: f64,
    pub max_iter: Option<usize>,
    pub t_init: TInit,
    pub t_fallback: f64,
    pub prior_window: (usize, usize),
    pub stop: StopChoice,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub example: Example,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub seed: u64,
    pub cells: usize,
    pub steps: usize,
    pub data_refinement: usize,
    pub lm: LmSettings,
    pub estimator_case: EstimatorCase,
    pub estimator_modes: usize,
    pub estimator_window: (usize, usize),
    pub convergence_cells: Vec<usize>,
    pub convergence_steps: Vec<usize>,
    pub out: Option<PathBuf>,
}

/// Base seed used when the configuration does not give one.
pub const DEFAULT_SEED: u64 = 20_190_501;

impl ExperimentConfig {
    /// Defaults of one built-in example.
    pub fn for_example(example: Example) -> Self {
        let (cells, steps, data_refinement) = example.default_mesh();
        Self {
            example,
            alphas: vec![0.5],
            epsilons: vec![0.0],
            seed: DEFAULT_SEED,
            cells,
            steps,
            data_refinement,
            lm: LmSettings {
                gamma0: None,
                mu0: None,
                rho: None,
                delta_t: 1e-3,
                max_iter: None,
                t_init: TInit::Estimate,
                t_fallback: 0.375,
                prior_window: (3, 10),
                stop: StopChoice::BestError,
                eta: 1.1,
            },
            estimator_case: EstimatorCase::Backward,
            estimator_modes: 400,
            estimator_window: (100, 400),
            convergence_cells: vec![16, 32, 64, 128],
            convergence_steps: vec![16, 32, 64, 128],
            out: None,
        }
    }

    /// Seed of the `(i_alpha, i_eps)` cell: one seed per cell.
    pub fn cell_seed(&self, i_alpha: usize, i_eps: usize) -> u64 {
        self.seed.wrapping_add(100 * i_alpha as u64 + i_eps as u64)
    }

    /// `μ₀` for the `i`-th order, if overridden.
    pub fn mu0_for(&self, i: usize) -> Option<f64> {
        self.lm.mu0.as_ref().map(|v| if v.len() == 1 { v[0] } else { v[i] })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            ConfigError::new(line, e.message().to_string())
        })?;
        let at = |section: &str, key: &str| find_key(text, section, key);
        let example: Example = raw
            .experiment
            .example
            .as_deref()
            .ok_or_else(|| ConfigError::new(None, "missing experiment.example"))?
            .parse()
            .map_err(|m: String| ConfigError::new(at("experiment", "example"), m))?;
        let mut c = Self::for_example(example);
        if let Some(a) = raw.experiment.alphas {
            if a.is_empty() || a.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                return Err(ConfigError::new(at("experiment", "alphas"), "alphas must be a nonempty list in (0, 1]"));
            }
            c.alphas = a;
        }
        if let Some(e) = raw.experiment.epsilons {
            if e.is_empty() || e.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(ConfigError::new(
                    at("experiment", "epsilons"),
                    "epsilons must be a nonempty list of nonnegative numbers",
                ));
            }
            c.epsilons = e;
        }
        if let Some(s) = raw.experiment.seed {
            c.seed = s;
        }
        c.out = raw.experiment.out.map(PathBuf::from);

        if let Some(n) = raw.mesh.cells {
            if n < 2 {
                return Err(ConfigError::new(at("mesh", "cells"), "cells must be at least 2"));
            }
            c.cells = n;
        }
        if let Some(n) = raw.mesh.steps {
            if n < 1 {
                return Err(ConfigError::new(at("mesh", "steps"), "steps must be positive"));
            }
            c.steps = n;
        }
        if let Some(n) = raw.mesh.data_refinement {
            if n < 1 {
                return Err(ConfigError::new(at("mesh", "data_refinement"), "data_refinement must be positive"));
            }
            c.data_refinement = n;
        }

        let lm = raw.lm;
        let positive = |v: Option<f64>, key: &str| -> Result<Option<f64>, ConfigError> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => {
                    Err(ConfigError::new(at("lm", key), format!("{key} must be positive")))
                }
                other => Ok(other),
            }
        };
        c.lm.gamma0 = positive(lm.gamma0, "gamma0")?;
        if let Some(m) = lm.mu0 {
            let v = match m {
                OneOrMany::One(x) => vec![x],
                OneOrMany::Many(v) => v,
            };
            if v.iter().any(|&x| !(x > 0.0)) || (v.len() != 1 && v.len() != c.alphas.len()) {
                return Err(ConfigError::new(
                    at("lm", "mu0"),
                    "mu0 must be one positive value or one per entry of alphas",
                ));
            }
            c.lm.mu0 = Some(v);
        }
        if let Some(r) = lm.rho {
            if !(r > 0.0 && r < 1.0) {
                return Err(ConfigError::new(at("lm", "rho"), "rho must lie in (0, 1)"));
            }
            c.lm.rho = Some(r);
        }
        if let Some(d) = positive(lm.delta_t, "delta_t")? {
            c.lm.delta_t = d;
        }
        c.lm.max_iter = lm.max_iter.or(c.lm.max_iter);
        if let Some(t) = lm.t_init {
            c.lm.t_init = match t {
                RawTInit::Value(v) if v > c.lm.delta_t => TInit::Value(v),
                RawTInit::Value(_) => return Err(ConfigError::new(at("lm", "t_init"), "t_init must exceed delta_t")),
                RawTInit::Word(w) if w == "estimate" => TInit::Estimate,
                RawTInit::Word(w) => {
                    return Err(ConfigError::new(
                        at("lm", "t_init"),
                        format!("t_init must be a number or \"estimate\", got \"{w}\""),
                    ))
                }
            };
        }
        if let Some(v) = lm.t_fallback {
            if !(v > c.lm.delta_t) {
                return Err(ConfigError::new(at("lm", "t_fallback"), "t_fallback must exceed delta_t"));
            }
            c.lm.t_fallback = v;
        }
        if let Some([lo, hi]) = lm.prior_window {
            if lo < 1 || hi < lo {
                return Err(ConfigError::new(at("lm", "prior_window"), "prior_window must satisfy 1 <= lo <= hi"));
            }
            c.lm.prior_window = (lo, hi);
        }
        if let Some(s) = lm.stop {
            c.lm.stop = match s.as_str() {
                "best" => StopChoice::BestError,
                "discrepancy" => StopChoice::Discrepancy,
                "max_iter" => StopChoice::MaxIter,
                other => {
                    return Err(ConfigError::new(
                        at("lm", "stop"),
                        format!("stop must be best, discrepancy or max_iter, got \"{other}\""),
                    ))
                }
            };
        }
        if let Some(e) = positive(lm.eta, "eta")? {
            c.lm.eta = e;
        }

        if let Some(case) = raw.estimator.case {
            c.estimator_case = match case.as_str() {
                "bp" => EstimatorCase::Backward,
                "isp" => EstimatorCase::Source,
                other => {
                    return Err(ConfigError::new(
                        at("estimator", "case"),
                        format!("estimator.case must be bp or isp, got \"{other}\""),
                    ))
                }
            };
        }
        if let Some(m) = raw.estimator.modes {
            if m < 2 {
                return Err(ConfigError::new(at("estimator", "modes"), "modes must be at least 2"));
            }
            c.estimator_modes = m;
        }
        if let Some([lo, hi]) = raw.estimator.window {
            if lo < 1 || hi < lo || hi > c.estimator_modes {
                return Err(ConfigError::new(
                    at("estimator", "window"),
                    format!("window must satisfy 1 <= lo <= hi <= {}", c.estimator_modes),
                ));
            }
            c.estimator_window = (lo, hi);
        } else {
            let m = c.estimator_modes;
            c.estimator_window = ((m / 4).max(1), m);
        }
        if let Some(v) = raw.convergence.cells {
            if v.len() < 2 || v.iter().any(|&n| n < 2) {
                return Err(ConfigError::new(at("convergence", "cells"), "at least two levels of at least 2 cells"));
            }
            c.convergence_cells = v;
        }
        if let Some(v) = raw.convergence.steps {
            if v.len() < 2 || v.contains(&0) {
                return Err(ConfigError::new(at("convergence", "steps"), "at least two positive step counts"));
            }
            c.convergence_steps = v;
        }
        Ok(c)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`.
fn find_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_example_defaults() {
        let c = ExperimentConfig::parse("[experiment]\nexample = \"5.3\"\n").unwrap();
        assert_eq!(c.example, Example::Ipp);
        assert_eq!(c.alphas, vec![0.5]);
        assert_eq!(c.cells, 100);
        assert_eq!(c.lm.t_init, TInit::Estimate);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let err = ExperimentConfig::parse("[experiment]\nexample = \"5.1i\"\nalphas = [0.5,\n").unwrap_err();
        assert!(err.line.is_some(), "{err}");
        let err = ExperimentConfig::parse("[experiment]\nexample = \"5.1i\"\n\n[lm]\nrho = 1.5\n").unwrap_err();
        assert_eq!(err.line, Some(5));
        let err = ExperimentConfig::parse("[experiment]\nexample = \"6.1\"\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = ExperimentConfig::parse("[experiment]\nexample = \"5.1i\"\ncolour = 1\n").unwrap_err();
        assert!(err.message.contains("colour"), "{err}");
    }

    #[test]
    fn per_order_mu0() {
        let text = "[experiment]\nexample = \"5.1i\"\nalphas = [0.25, 0.5]\n[lm]\nmu0 = [1e-3, 2e-3]\nt_init = 0.4\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.mu0_for(1), Some(2e-3));
        assert_eq!(c.lm.t_init, TInit::Value(0.4));
        let bad = "[experiment]\nexample = \"5.1i\"\nalphas = [0.25, 0.5]\n[lm]\nmu0 = [1e-3, 2e-3, 3e-3]\n";
        assert_eq!(ExperimentConfig::parse(bad).unwrap_err().line, Some(5));
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let c = ExperimentConfig::for_example(Example::Bp1);
        assert_ne!(c.cell_seed(0, 1), c.cell_seed(1, 0));
        assert_eq!(c.cell_seed(0, 0), DEFAULT_SEED);
    }
}
