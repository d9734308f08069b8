use nalgebra::{DMatrix, DVector};

use super::kalman::kalman_update;
use super::system::JumpGMSystem;
use crate::error::{AtTime, Result};
use crate::gaussian::linalg::{log_sum_exp, symmetrize};
use crate::gaussian::{Categorical, GaussianDensity};

/// Filtering output in mixture form: per-regime Gaussians with regime weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFilterResult {
    pub regime_probs: Vec<Categorical>,
    /// `components[t][z]` is the state density given `z_t = z`.
    pub components: Vec<Vec<GaussianDensity>>,
    pub log_evidence_increments: Vec<f64>,
    pub log_evidence: f64,
}

impl MixtureFilterResult {
    /// Moment-matched overall filtering density at `t`.
    pub fn moment_matched(&self, t: usize) -> Result<GaussianDensity> {
        moment_match(&self.components[t], self.regime_probs[t].probs())
    }
}

/// Single Gaussian with the first two moments of a mixture.
pub fn moment_match(components: &[GaussianDensity], weights: &[f64]) -> Result<GaussianDensity> {
    let d = components[0].dim();
    let mut mean = DVector::zeros(d);
    for (g, &w) in components.iter().zip(weights) {
        mean += g.mean() * w;
    }
    let mut cov = DMatrix::zeros(d, d);
    for (g, &w) in components.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let dm = g.mean() - &mean;
        cov += (g.cov() + &dm * dm.transpose()) * w;
    }
    GaussianDensity::new(mean, symmetrize(&cov))
}

/// Interacting multiple model filter.
///
/// Each source regime `j` predicts with its own state kernel; destination
/// regime `i` mixes the predictions with weights `λ(i|j) μ(j)`, then applies
/// observation kernel `i`. The evidence increment is computed from the mixed
/// (pre-update) regime priors.
pub fn imm_filter(sys: &JumpGMSystem, y: &[DVector<f64>]) -> Result<MixtureFilterResult> {
    sys.check_observations(y)?;
    let m = sys.num_regimes();
    let n = sys.horizon + 1;
    let lambda = sys.chain_kernel.matrix();
    let mut regime_probs: Vec<Categorical> = Vec::with_capacity(n);
    let mut components: Vec<Vec<GaussianDensity>> = Vec::with_capacity(n);
    let mut increments = Vec::with_capacity(n);
    for t in 0..n {
        let (priors, prior_probs): (Vec<GaussianDensity>, Vec<f64>) = if t == 0 {
            (sys.state_init.clone(), sys.chain_init.probs().to_vec())
        } else {
            let mu = regime_probs[t - 1].probs();
            let predicted: Vec<GaussianDensity> = components[t - 1]
                .iter()
                .zip(&sys.state_kernels)
                .map(|(g, k)| k.push(g))
                .collect::<Result<_>>()
                .at(t)?;
            let mut priors = Vec::with_capacity(m);
            let mut probs = Vec::with_capacity(m);
            for i in 0..m {
                let joint: Vec<f64> = (0..m).map(|j| lambda[(i, j)] * mu[j]).collect();
                let c: f64 = joint.iter().sum();
                probs.push(c);
                if c > 0.0 {
                    let w: Vec<f64> = joint.iter().map(|v| v / c).collect();
                    priors.push(moment_match(&predicted, &w).at(t)?);
                } else {
                    // unreachable regime: any prior will do, its weight stays 0
                    priors.push(predicted[i].clone());
                }
            }
            (priors, probs)
        };
        let mut posts = Vec::with_capacity(m);
        let mut log_w = Vec::with_capacity(m);
        for i in 0..m {
            let (post, ll) = kalman_update(&priors[i], &sys.obs_kernels[i], &y[t]).at(t)?;
            posts.push(post);
            log_w.push(prior_probs[i].ln() + ll);
        }
        let (lse, probs) = Categorical::from_log_weights(&log_w).at(t)?;
        debug_assert!((lse - log_sum_exp(&log_w)).abs() < 1e-12);
        increments.push(lse);
        regime_probs.push(probs);
        components.push(posts);
    }
    Ok(MixtureFilterResult {
        regime_probs,
        components,
        log_evidence: increments.iter().sum(),
        log_evidence_increments: increments,
    })
}
