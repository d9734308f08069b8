use nalgebra::DVector;

use crate::error::{AtTime, Error, Result};
use crate::gaussian::linalg::check_len;
use crate::gaussian::{predict_and_reverse, AffineGaussianKernel, GaussianDensity};

/// Gauss–Markov process on `0..=T` stored with both Markov factorizations.
///
/// `forward_kernels[t - 1]` is `q(x_t | x_{t-1})` and `reverse_kernels[t - 1]`
/// is `q(x_{t-1} | x_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMarkovPosterior {
    pub marginals: Vec<GaussianDensity>,
    pub forward_kernels: Vec<AffineGaussianKernel>,
    pub reverse_kernels: Vec<AffineGaussianKernel>,
}

impl GaussMarkovPosterior {
    /// Builds the process from its terminal marginal and reverse kernels.
    pub fn from_reverse(
        terminal: GaussianDensity,
        reverse_kernels: Vec<AffineGaussianKernel>,
    ) -> Result<Self> {
        let n = reverse_kernels.len() + 1;
        let mut marginals = vec![terminal; n];
        let mut forward_kernels = Vec::with_capacity(n - 1);
        for t in (1..n).rev() {
            let (prev, fwd) = predict_and_reverse(&marginals[t], &reverse_kernels[t - 1]).at(t)?;
            marginals[t - 1] = prev;
            forward_kernels.push(fwd);
        }
        forward_kernels.reverse();
        Ok(Self {
            marginals,
            forward_kernels,
            reverse_kernels,
        })
    }

    pub fn horizon(&self) -> usize {
        self.marginals.len() - 1
    }

    /// The process of `x + delta`: every marginal mean shifts by `delta`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        let d = self.marginals[0].dim();
        let shift = DVector::from_element(d, delta);
        let move_kernel = |k: &AffineGaussianKernel| {
            AffineGaussianKernel::new(
                k.slope().clone(),
                k.offset() + &shift - k.slope() * &shift,
                k.cov().clone(),
            )
        };
        Ok(Self {
            marginals: self
                .marginals
                .iter()
                .map(|g| GaussianDensity::new(g.mean() + &shift, g.cov().clone()))
                .collect::<Result<_>>()?,
            forward_kernels: self
                .forward_kernels
                .iter()
                .map(move_kernel)
                .collect::<Result<_>>()?,
            reverse_kernels: self
                .reverse_kernels
                .iter()
                .map(move_kernel)
                .collect::<Result<_>>()?,
        })
    }

    /// Largest deviation from marginal consistency of either factorization.
    pub fn consistency_error(&self) -> Result<f64> {
        check_len(
            "posterior kernels",
            self.horizon(),
            self.forward_kernels.len(),
        )?;
        check_len(
            "posterior kernels",
            self.horizon(),
            self.reverse_kernels.len(),
        )?;
        let mut worst: f64 = 0.0;
        for t in 1..=self.horizon() {
            let fwd = self.forward_kernels[t - 1].push(&self.marginals[t - 1])?;
            let rev = self.reverse_kernels[t - 1].push(&self.marginals[t])?;
            for (a, b) in [(&fwd, &self.marginals[t]), (&rev, &self.marginals[t - 1])] {
                worst = worst
                    .max((a.mean() - b.mean()).amax())
                    .max((a.cov() - b.cov()).amax());
            }
        }
        Ok(worst)
    }

    /// Checks both marginal constraints to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let err = self.consistency_error()?;
        if err > tol {
            return Err(Error::invalid(
                "Gauss-Markov posterior",
                format!("marginal constraints violated by {err:e}"),
            ));
        }
        Ok(())
    }
}
