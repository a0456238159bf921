//! Strict JSON run configuration. Unknown keys are rejected so that a
//! config file is an exact record of an experiment.

use crate::continuation::StepControl;
use crate::mesh::{
    build_grid, check_hypotheses, sample_weights, Frame, Grid, HypothesisReport, ProblemParams,
    WeightPair, WeightSpec,
};
use crate::{Error, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub x_lo: f64,
    pub x_hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub a_spec: WeightSpec,
    pub b_spec: WeightSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub p: f64,
    pub q: f64,
    #[serde(default = "default_shift_m")]
    pub shift_m: f64,
}

fn default_shift_m() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub eps_sequence: Vec<f64>,
    /// Norm cap; defaults to four times the unregularized constant limit.
    pub rho: Option<f64>,
    /// Probe parameter for the two-solution check; defaults to twice the
    /// rescaled bifurcation parameter of the finest branch.
    pub lambda_probe: Option<f64>,
    /// Parameter budget for two-sided (mushroom) traces.
    pub sigma_param_cap: f64,
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub newton_tol: f64,
    pub max_corrector_iter: usize,
    pub trivial_tol: f64,
    pub const_tol: f64,
    pub param_tol: f64,
    pub sol_sep_tol: f64,
    pub s0: f64,
    pub max_points: usize,
    /// Acceptance threshold for the limit-set estimate.
    pub limsup_tol: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        let s = StepControl::default();
        ContinuationConfig {
            eps_sequence: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            rho: None,
            lambda_probe: None,
            sigma_param_cap: 500.0,
            ds0: s.ds0,
            ds_min: s.ds_min,
            ds_max: s.ds_max,
            newton_tol: s.newton_tol,
            max_corrector_iter: s.max_corrector_iter,
            trivial_tol: s.trivial_tol,
            const_tol: s.const_tol,
            param_tol: s.param_tol,
            sol_sep_tol: s.sol_sep_tol,
            s0: s.s0,
            max_points: s.max_points,
            limsup_tol: 0.75,
        }
    }
}

impl ContinuationConfig {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            ds0: self.ds0,
            ds_min: self.ds_min,
            ds_max: self.ds_max,
            newton_tol: self.newton_tol,
            max_corrector_iter: self.max_corrector_iter,
            trivial_tol: self.trivial_tol,
            const_tol: self.const_tol,
            param_tol: self.param_tol,
            sol_sep_tol: self.sol_sep_tol,
            s0: self.s0,
            max_points: self.max_points,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbesConfig {
    pub n_starts: usize,
}

impl Default for ProbesConfig {
    fn default() -> Self {
        ProbesConfig { n_starts: 20 }
    }
}

/// Full run configuration, strictly parsed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub grid: GridConfig,
    pub weights: WeightsConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub probes: ProbesConfig,
}

fn default_seed() -> u64 {
    42
}

/// A loaded, validated configuration with its sampled artifacts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub grid: Grid,
    pub weights: WeightPair,
    pub params: ProblemParams,
    pub hypotheses: HypothesisReport,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Re-validates every module-level invariant and samples the weights.
    pub fn prepare(&self) -> Result<Prepared> {
        let grid = build_grid(self.grid.n, self.grid.x_lo, self.grid.x_hi)?;
        let params =
            ProblemParams::new(self.params.p, self.params.q, 0.0, self.params.shift_m, Frame::Q)?;
        let weights = sample_weights(&self.weights.a_spec, &self.weights.b_spec, &grid)?;
        let cc = &self.continuation;
        if cc.eps_sequence.is_empty() {
            return Err(Error::Config("eps_sequence must not be empty".into()));
        }
        for pair in cc.eps_sequence.windows(2) {
            if pair[0] <= pair[1] {
                return Err(Error::Config("eps_sequence must be strictly decreasing".into()));
            }
        }
        if cc.eps_sequence.iter().any(|&e| e <= 0.0 || e > 1.0) {
            return Err(Error::Config("eps_sequence values must lie in (0, 1]".into()));
        }
        for (name, value) in [
            ("ds0", cc.ds0),
            ("ds_min", cc.ds_min),
            ("ds_max", cc.ds_max),
            ("newton_tol", cc.newton_tol),
            ("trivial_tol", cc.trivial_tol),
            ("const_tol", cc.const_tol),
            ("param_tol", cc.param_tol),
            ("sol_sep_tol", cc.sol_sep_tol),
            ("s0", cc.s0),
            ("limsup_tol", cc.limsup_tol),
            ("sigma_param_cap", cc.sigma_param_cap),
        ] {
            if !(value > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {value}")));
            }
        }
        if cc.ds_min > cc.ds_max {
            return Err(Error::Config("ds_min must not exceed ds_max".into()));
        }
        if let Some(rho) = cc.rho {
            if !(rho > 0.0) {
                return Err(Error::Config(format!("rho must be > 0, got {rho}")));
            }
        }
        let hypotheses = check_hypotheses(&weights, &params);
        Ok(Prepared { config: self.clone(), grid, weights, params, hypotheses })
    }
}
