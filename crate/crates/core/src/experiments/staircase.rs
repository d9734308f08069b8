use nalgebra::DMatrix;

use super::config::StaircaseConfig;
use crate::error::Result;
use crate::exact::JumpGMSystem;
use crate::gaussian::{AffineGaussianKernel, Categorical, CategoricalKernel, GaussianDensity};

/// Chain that stays with probability `p` and otherwise moves to a neighbour,
/// split evenly in the interior and entirely towards the single neighbour at
/// the ends.
pub fn staircase_chain(m: usize, p: f64) -> Result<CategoricalKernel> {
    let mut k = DMatrix::zeros(m, m);
    if m == 1 {
        k[(0, 0)] = 1.0;
        return CategoricalKernel::new(k);
    }
    for j in 0..m {
        k[(j, j)] = p;
        if j == 0 {
            k[(1, 0)] = 1.0 - p;
        } else if j == m - 1 {
            k[(m - 2, j)] = 1.0 - p;
        } else {
            k[(j - 1, j)] = 0.5 * (1.0 - p);
            k[(j + 1, j)] = 0.5 * (1.0 - p);
        }
    }
    CategoricalKernel::new(k)
}

/// Stationary mean of regime `z` (0-based), the `z - 1` rule for 1-based labels.
pub fn staircase_mean(z: usize) -> f64 {
    z as f64
}

/// Scalar regime-switching AR(1) with identity observations.
pub fn build_staircase(cfg: &StaircaseConfig) -> Result<JumpGMSystem> {
    cfg.validate()?;
    let var0 = cfg.sigma0 * cfg.sigma0;
    let q = (1.0 - cfg.phi0 * cfg.phi0) * var0;
    let mut state_init = Vec::with_capacity(cfg.m);
    let mut state_kernels = Vec::with_capacity(cfg.m);
    let mut obs_kernels = Vec::with_capacity(cfg.m);
    for z in 0..cfg.m {
        let mu = staircase_mean(z);
        state_init.push(GaussianDensity::scalar(mu, var0)?);
        state_kernels.push(AffineGaussianKernel::scalar(
            cfg.phi0,
            (1.0 - cfg.phi0) * mu,
            q,
        )?);
        obs_kernels.push(AffineGaussianKernel::scalar(1.0, 0.0, cfg.r)?);
    }
    JumpGMSystem::new(
        Categorical::uniform(cfg.m),
        staircase_chain(cfg.m, cfg.p)?,
        state_init,
        state_kernels,
        obs_kernels,
        cfg.t,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_columns() {
        let k = staircase_chain(4, 0.9).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(k.column(0).probs(), &[0.9, 0.1, 0.0, 0.0]));
        let c1 = k.column(1);
        assert!((c1.probs()[0] - 0.05).abs() < 1e-15 && (c1.probs()[2] - 0.05).abs() < 1e-15);
        assert!(close(k.column(3).probs(), &[0.0, 0.0, 0.1, 0.9]));
    }

    #[test]
    fn process_noise() {
        let sys = build_staircase(&StaircaseConfig::default()).unwrap();
        for k in &sys.state_kernels {
            assert!((k.cov()[(0, 0)] - 0.1875).abs() < 1e-15);
        }
        assert_eq!(sys.state_kernels[2].offset()[0], 1.0);
    }
}
