use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the staircase study. TOML keys are the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaircaseConfig {
    #[serde(alias = "M")]
    pub m: usize,
    /// Probability of staying in the current regime.
    pub p: f64,
    pub phi0: f64,
    /// Stationary mean per regime; only `"z_minus_1"` is defined.
    pub mu0_rule: String,
    /// Stationary standard deviation.
    pub sigma0: f64,
    /// Observation variance.
    #[serde(alias = "R")]
    pub r: f64,
    /// Horizon: observations are indexed `0..=t`.
    #[serde(alias = "T")]
    pub t: usize,
    pub trials: usize,
    pub seed: u64,
    pub smoother_iters: usize,
}

pub const FULL_SCALE_HORIZON: usize = 513;
pub const FULL_SCALE_TRIALS: usize = 1000;

impl Default for StaircaseConfig {
    fn default() -> Self {
        Self {
            m: 4,
            p: 0.9,
            phi0: 0.5,
            mu0_rule: "z_minus_1".into(),
            sigma0: 0.5,
            r: 1.0,
            t: 129,
            trials: 100,
            seed: 0,
            smoother_iters: 10,
        }
    }
}

impl StaircaseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.m < 1 {
            return bad("m must be at least 1");
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad("p must lie in (0, 1)");
        }
        if !(self.phi0.abs() < 1.0) {
            return bad("|phi0| must be below 1");
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad("sigma0 must be positive");
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad("r must be positive");
        }
        if self.mu0_rule != "z_minus_1" {
            return bad("mu0_rule must be \"z_minus_1\"");
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Horizon and trial count of the full study.
    pub fn full_scale(mut self) -> Self {
        self.t = FULL_SCALE_HORIZON;
        self.trials = FULL_SCALE_TRIALS;
        self
    }
}
