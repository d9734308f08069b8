use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::linalg::cholesky;
use crate::gaussian::{AffineGaussianKernel, Categorical, GaussianDensity};

/// Clamping applied to regime probabilities in the log-odds metric only.
pub const LOG_ODDS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Filtering,
    Smoothing,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Filtering => "filtering",
            Mode::Smoothing => "smoothing",
        }
    }
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub method: String,
    pub mode: Mode,
    pub rmse_x: f64,
    pub accuracy_z: f64,
    pub log_odds_z: f64,
    pub chi2: f64,
    pub elbo: f64,
    pub failed: bool,
}

impl TrialMetrics {
    pub fn failed(trial: usize, method: &str, mode: Mode) -> Self {
        Self {
            trial,
            method: method.to_string(),
            mode,
            rmse_x: f64::NAN,
            accuracy_z: f64::NAN,
            log_odds_z: f64::NAN,
            chi2: f64::NAN,
            elbo: f64::NAN,
            failed: true,
        }
    }
}

/// Estimates of one method at every time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<'a> {
    pub regime_probs: &'a [Categorical],
    pub states: &'a [GaussianDensity],
    /// Reverse kernels of a whole-path posterior; only used in smoothing mode.
    pub reverse_kernels: Option<&'a [AffineGaussianKernel]>,
}

/// Natural-log odds of `p` after clamping to `[ε, 1 - ε]`.
pub fn log_odds(p: f64) -> f64 {
    let p = p.clamp(LOG_ODDS_EPS, 1.0 - LOG_ODDS_EPS);
    (p / (1.0 - p)).ln()
}

fn mahalanobis(x: &DVector<f64>, g: &GaussianDensity) -> Result<f64> {
    let chol = cholesky(g.cov(), "metric cov")?;
    let r = x - g.mean();
    Ok(r.dot(&chol.solve(&r)))
}

/// Whole-path statistic `(x_T - m_T)ᵀ P_T⁻¹ (x_T - m_T) + Σ_t rᵀ Q_{t-1|t}⁻¹ r`
/// with `r = x_{t-1} - a_{t-1|t}(x_t)`.
pub fn path_chi2(
    x: &[DVector<f64>],
    terminal: &GaussianDensity,
    reverse_kernels: &[AffineGaussianKernel],
) -> Result<f64> {
    let horizon = x.len() - 1;
    let mut total = mahalanobis(&x[horizon], terminal)?;
    for t in 1..=horizon {
        total += mahalanobis(&x[t - 1], &reverse_kernels[t - 1].at(&x[t])?)?;
    }
    Ok(total)
}

pub fn compute_metrics(
    z: &[usize],
    x: &[DVector<f64>],
    est: &Estimate<'_>,
    mode: Mode,
) -> Result<(f64, f64, f64, f64)> {
    let n = z.len();
    for (context, got) in [
        ("state path length", x.len()),
        ("regime estimate length", est.regime_probs.len()),
        ("state estimate length", est.states.len()),
    ] {
        if got != n {
            return Err(Error::Dimension {
                context,
                expected: n,
                got,
            });
        }
    }
    let mut sq = 0.0;
    let mut hits = 0usize;
    let mut odds = 0.0;
    for t in 0..n {
        sq += (&x[t] - est.states[t].mean()).norm_squared();
        let probs = &est.regime_probs[t];
        if probs.argmax() == z[t] {
            hits += 1;
        }
        odds += log_odds(probs.probs()[z[t]]);
    }
    let chi2 = match (mode, est.reverse_kernels) {
        (Mode::Smoothing, Some(rev)) => path_chi2(x, &est.states[n - 1], rev)?,
        (Mode::Smoothing, None) => {
            return Err(Error::invalid(
                "metrics",
                "smoothing mode needs reverse kernels",
            ))
        }
        (Mode::Filtering, _) => {
            let mut total = 0.0;
            for t in 0..n {
                total += mahalanobis(&x[t], &est.states[t])?;
            }
            total
        }
    };
    Ok((
        (sq / n as f64).sqrt(),
        hits as f64 / n as f64,
        odds / n as f64,
        chi2,
    ))
}
