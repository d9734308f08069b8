use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::exact::JumpGMSystem;
use crate::gaussian::linalg::cholesky;
use crate::gaussian::{Categorical, GaussianDensity};

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Regimes = 0,
    States = 1,
    Observations = 2,
}

/// Generator keyed by `(seed, trial)` with one stream per purpose.
pub fn rng_for(seed: u64, trial: u64, stream: Stream) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

/// Sampled regime, state and observation paths; regimes are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub z: Vec<usize>,
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

pub fn sample_categorical(p: &Categorical, rng: &mut ChaCha20Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.probs().iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // round-off: last index with positive mass
    p.probs().iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

pub fn sample_gaussian(g: &GaussianDensity, rng: &mut ChaCha20Rng) -> Result<DVector<f64>> {
    let l = cholesky(g.cov(), "sampling cov")?.l();
    let e = DVector::from_fn(g.dim(), |_, _| StandardNormal.sample(rng));
    Ok(g.mean() + l * e)
}

/// Ancestral sampling of one trial.
pub fn simulate_trial(sys: &JumpGMSystem, seed: u64, trial: u64) -> Result<Paths> {
    let mut rz = rng_for(seed, trial, Stream::Regimes);
    let mut rx = rng_for(seed, trial, Stream::States);
    let mut ry = rng_for(seed, trial, Stream::Observations);
    let n = sys.horizon + 1;
    let mut z = Vec::with_capacity(n);
    let mut x: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        let (zt, xt) = if t == 0 {
            let z0 = sample_categorical(&sys.chain_init, &mut rz);
            (z0, sample_gaussian(&sys.state_init[z0], &mut rx)?)
        } else {
            let prev = z[t - 1];
            let zt = sample_categorical(&sys.chain_kernel.column(prev), &mut rz);
            (
                zt,
                sample_gaussian(&sys.state_kernels[prev].at(&x[t - 1])?, &mut rx)?,
            )
        };
        y.push(sample_gaussian(&sys.obs_kernels[zt].at(&xt)?, &mut ry)?);
        z.push(zt);
        x.push(xt);
    }
    Ok(Paths { z, x, y })
}

/// Same as [`simulate_trial`] with trial index 0.
pub fn simulate(sys: &JumpGMSystem, seed: u64) -> Result<Paths> {
    simulate_trial(sys, seed, 0)
}
