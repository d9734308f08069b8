use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gaussian::{AffineGaussianKernel, Categorical, CategoricalKernel, GaussianDensity};

/// `log ρ_t(x, z) = log κ_t + log f*_t(z) + log g*_t(x | z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardRepresenter {
    pub log_kappa: f64,
    pub f_star: Categorical,
    pub g_star: Vec<GaussianDensity>,
}

impl ForwardRepresenter {
    pub fn log_density(&self, x: &DVector<f64>, z: usize) -> Result<f64> {
        let p = self.f_star.probs()[z];
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_kappa + p.ln() + self.g_star[z].log_pdf(x)?)
    }

    pub fn num_regimes(&self) -> usize {
        self.f_star.len()
    }
}

/// Variational time marginal `q_t(x, z) = f_t(z) g_t(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMarginal {
    pub f: Categorical,
    pub g: GaussianDensity,
}

/// Factored reverse-time kernel `f_{t-1|t}(z' | z) g_{t-1|t}(x' | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseKernelPair {
    /// Entry `(i, j)` is the probability of `z_{t-1} = i` given `z_t = j`.
    pub f_rev: CategoricalKernel,
    pub g_rev: AffineGaussianKernel,
}

impl ReverseKernelPair {
    /// Pushes `q_t` back to `q_{t-1}`.
    pub fn push(&self, q: &ProductMarginal) -> Result<ProductMarginal> {
        Ok(ProductMarginal {
            f: self.f_rev.propagate(&q.f)?,
            g: self.g_rev.push(&q.g)?,
        })
    }
}

/// Iteration limits and tolerances of the coordinate-ascent loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Passes of the per-step loop over reverse kernels and marginal.
    pub inner_max_iters: usize,
    /// Absolute objective change that ends the per-step loop.
    pub inner_tol: f64,
    /// Passes of the (f, g) coordinate ascent in the filter update.
    pub filter_max_iters: usize,
    pub filter_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            inner_max_iters: 25,
            inner_tol: 1e-9,
            filter_max_iters: 200,
            filter_tol: 1e-12,
        }
    }
}
