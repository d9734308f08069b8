use nalgebra::DVector;

use super::imm::moment_match;
use super::kalman::{kalman_filter, kalman_update, rts_smoother};
use super::system::JumpGMSystem;
use crate::error::{AtTime, Error, Result};
use crate::gaussian::linalg::log_sum_exp;
use crate::gaussian::{Categorical, GaussianDensity};

/// Default limit on the number of enumerated regime paths.
pub const DEFAULT_PATH_CAP: u64 = 1 << 20;

#[derive(Debug, Clone)]
struct Node {
    regime: usize,
    parent: usize,
    /// `log p(z_{0:t}, y_{0:t-1})`
    log_w_pred: f64,
    /// `x_t | z_{0:t}, y_{0:t-1}`
    pred: GaussianDensity,
    /// `log p(z_{0:t}, y_{0:t})`
    log_w: f64,
    /// `x_t | z_{0:t}, y_{0:t}`
    filt: GaussianDensity,
}

/// Exact filtering by enumeration of all regime paths.
///
/// Level `t` holds one node per prefix `z_{0:t}`, in lexicographic order.
#[derive(Debug, Clone)]
pub struct BruteForce {
    levels: Vec<Vec<Node>>,
    num_regimes: usize,
}

pub fn brute_force_jgm(sys: &JumpGMSystem, y: &[DVector<f64>]) -> Result<BruteForce> {
    brute_force_jgm_with_cap(sys, y, DEFAULT_PATH_CAP)
}

fn path_count(m: usize, horizon: usize, cap: u64) -> Result<u128> {
    let mut count: u128 = 1;
    for _ in 0..=horizon {
        count = count.saturating_mul(m as u128);
    }
    if count > cap as u128 {
        return Err(Error::EnumerationCap {
            required: count,
            cap,
        });
    }
    Ok(count)
}

pub fn brute_force_jgm_with_cap(
    sys: &JumpGMSystem,
    y: &[DVector<f64>],
    cap: u64,
) -> Result<BruteForce> {
    sys.check_observations(y)?;
    let m = sys.num_regimes();
    path_count(m, sys.horizon, cap)?;
    let mut levels: Vec<Vec<Node>> = Vec::with_capacity(sys.horizon + 1);
    let mut first = Vec::with_capacity(m);
    for z in 0..m {
        let log_prior = sys.chain_init.probs()[z].ln();
        let pred = sys.state_init[z].clone();
        let (filt, ll) = kalman_update(&pred, &sys.obs_kernels[z], &y[0]).at(0)?;
        first.push(Node {
            regime: z,
            parent: usize::MAX,
            log_w_pred: log_prior,
            pred,
            log_w: log_prior + ll,
            filt,
        });
    }
    levels.push(first);
    for t in 1..=sys.horizon {
        let prev = &levels[t - 1];
        let mut level = Vec::with_capacity(prev.len() * m);
        for (pi, parent) in prev.iter().enumerate() {
            let pred = sys.state_kernels[parent.regime].push(&parent.filt).at(t)?;
            for z in 0..m {
                let log_w_pred = parent.log_w + sys.chain_kernel.prob(z, parent.regime).ln();
                let (filt, ll) = kalman_update(&pred, &sys.obs_kernels[z], &y[t]).at(t)?;
                level.push(Node {
                    regime: z,
                    parent: pi,
                    log_w_pred,
                    pred: pred.clone(),
                    log_w: log_w_pred + ll,
                    filt,
                });
            }
        }
        levels.push(level);
    }
    Ok(BruteForce {
        levels,
        num_regimes: m,
    })
}

impl BruteForce {
    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    /// Number of complete regime paths enumerated.
    pub fn num_paths(&self) -> usize {
        self.levels[self.horizon()].len()
    }

    /// `log h_{0:T}`.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence_at(self.horizon())
    }

    /// `log h_{0:t}`.
    pub fn log_evidence_at(&self, t: usize) -> f64 {
        let w: Vec<f64> = self.levels[t].iter().map(|n| n.log_w).collect();
        log_sum_exp(&w)
    }

    /// Filtering distribution of `z_t`.
    pub fn regime_probs(&self, t: usize) -> Result<Categorical> {
        let mut log_w = vec![Vec::new(); self.num_regimes];
        for n in &self.levels[t] {
            log_w[n.regime].push(n.log_w);
        }
        let per: Vec<f64> = log_w.iter().map(|w| log_sum_exp(w)).collect();
        Ok(Categorical::from_log_weights(&per)?.1)
    }

    /// Filtering mixture at `t` as `(normalized weight, regime, density)` per prefix.
    pub fn filtering_mixture(&self, t: usize) -> Vec<(f64, usize, &GaussianDensity)> {
        let lse = self.log_evidence_at(t);
        self.levels[t]
            .iter()
            .map(|n| ((n.log_w - lse).exp(), n.regime, &n.filt))
            .collect()
    }

    /// Moment-matched filtering density of `x_t`.
    pub fn filter_moments(&self, t: usize) -> Result<GaussianDensity> {
        let mix = self.filtering_mixture(t);
        let comps: Vec<GaussianDensity> = mix.iter().map(|(_, _, g)| (*g).clone()).collect();
        let w: Vec<f64> = mix.iter().map(|(w, _, _)| *w).collect();
        moment_match(&comps, &w)
    }

    /// `log U_t^{0:t}(x, z) = log p(x_t = x, z_t = z, y_{0:t})`.
    pub fn log_unnormalized_filter(&self, t: usize, x: &DVector<f64>, z: usize) -> Result<f64> {
        let mut terms = Vec::new();
        for n in self.levels[t].iter().filter(|n| n.regime == z) {
            terms.push(n.log_w + n.filt.log_pdf(x)?);
        }
        Ok(log_sum_exp(&terms))
    }

    /// `log U_t^{0:t-1}(x, z) = log p(x_t = x, z_t = z, y_{0:t-1})`.
    pub fn log_unnormalized_predictive(&self, t: usize, x: &DVector<f64>, z: usize) -> Result<f64> {
        let mut terms = Vec::new();
        for n in self.levels[t].iter().filter(|n| n.regime == z) {
            terms.push(n.log_w_pred + n.pred.log_pdf(x)?);
        }
        Ok(log_sum_exp(&terms))
    }

    /// Complete regime paths with their posterior log-weights `log p(z_{0:T}, y_{0:T})`.
    pub fn paths(&self) -> Vec<(Vec<usize>, f64)> {
        let horizon = self.horizon();
        self.levels[horizon]
            .iter()
            .map(|leaf| {
                let mut path = vec![0; horizon + 1];
                let mut node = leaf;
                for t in (0..=horizon).rev() {
                    path[t] = node.regime;
                    if t > 0 {
                        node = &self.levels[t - 1][node.parent];
                    }
                }
                (path, leaf.log_w)
            })
            .collect()
    }
}

/// Exact smoothing marginals of a jump system, moment-matched per time.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceSmoothing {
    pub log_evidence: f64,
    pub regime_probs: Vec<Categorical>,
    pub moments: Vec<GaussianDensity>,
}

/// Runs a Kalman filter and RTS smoother along every regime path.
pub fn brute_force_smoother(sys: &JumpGMSystem, y: &[DVector<f64>]) -> Result<BruteForceSmoothing> {
    let bf = brute_force_jgm(sys, y)?;
    let paths = bf.paths();
    let lse = bf.log_evidence();
    let n = sys.horizon + 1;
    let mut regime = vec![vec![0.0; sys.num_regimes()]; n];
    let mut comps: Vec<Vec<GaussianDensity>> = vec![Vec::with_capacity(paths.len()); n];
    let mut weights = Vec::with_capacity(paths.len());
    for (path, log_w) in &paths {
        let w = (log_w - lse).exp();
        let lin = sys.along_path(path)?;
        let smooth = rts_smoother(&lin, &kalman_filter(&lin, y)?)?;
        for t in 0..n {
            regime[t][path[t]] += w;
            comps[t].push(smooth.marginals[t].clone());
        }
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(BruteForceSmoothing {
        log_evidence: lse,
        regime_probs: regime
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                Categorical::new(r.iter().map(|v| v / s).collect())
            })
            .collect::<Result<_>>()?,
        moments: comps
            .iter()
            .map(|c| moment_match(c, &weights))
            .collect::<Result<_>>()?,
    })
}
