//! Closed forms for Gaussian relative entropies and averaged log-densities.

use nalgebra::{DMatrix, DVector};

use super::categorical::Categorical;
use super::density::{AffineGaussianKernel, GaussianDensity};
use super::linalg::{check_len, cholesky, log_det, quad_form, symmetrize, LOG_2PI};
use super::quadratic::LogQuadraticForm;
use crate::error::{Error, Result};

/// `∫ log(g_star / g) g dx`, the negative relative entropy of `g_star` w.r.t. `g`.
///
/// Never positive; zero exactly when the two densities coincide.
pub fn neg_relative_entropy(g_star: &GaussianDensity, g: &GaussianDensity) -> Result<f64> {
    check_len("neg_relative_entropy", g_star.dim(), g.dim())?;
    let chol_star = cholesky(g_star.cov(), "g_star cov")?;
    let chol = cholesky(g.cov(), "g cov")?;
    let d = g.dim() as f64;
    let trace = chol_star.solve(g.cov()).trace();
    let diff = g_star.mean() - g.mean();
    let maha = quad_form(&chol_star, &diff);
    Ok(-0.5 * (trace - d + maha + log_det(&chol_star) - log_det(&chol)))
}

/// Solves `log{ζ ḡ(x)} = Σ_z f(z) log g(x|z)` for `(log ζ, ḡ)`.
///
/// `ḡ` carries the `f`-weighted average precision. The scale factor is
/// returned on the log scale; its value is fixed by evaluating both sides at
/// `x = mean(ḡ)`.
pub fn average_log_gaussians(
    components: &[GaussianDensity],
    weights: &Categorical,
) -> Result<(f64, GaussianDensity)> {
    if components.is_empty() {
        return Err(Error::invalid("average_log_gaussians", "no components"));
    }
    check_len(
        "average_log_gaussians weights",
        components.len(),
        weights.len(),
    )?;
    let d = components[0].dim();
    let mut precision = DMatrix::zeros(d, d);
    let mut shift = DVector::zeros(d);
    for (g, &w) in components.iter().zip(weights.probs()) {
        check_len("average_log_gaussians component", d, g.dim())?;
        if w == 0.0 {
            continue;
        }
        let p = g.precision()?;
        shift += &p * g.mean() * w;
        precision += p * w;
    }
    let gbar = GaussianDensity::from_information(&symmetrize(&precision), &shift)
        .map_err(|_| Error::not_pd("averaged precision"))?;
    let mut log_zeta = 0.0;
    for (g, &w) in components.iter().zip(weights.probs()) {
        if w > 0.0 {
            log_zeta += w * g.log_pdf(gbar.mean())?;
        }
    }
    log_zeta -= gbar.log_pdf(gbar.mean())?;
    Ok((log_zeta, gbar))
}

/// Output of [`conditional_relative_entropy_likelihood`].
///
/// Represents `x ↦ log_c + log N(y; H x, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeEntropyLikelihood {
    pub log_c: f64,
    pub y: DVector<f64>,
    pub h: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl RelativeEntropyLikelihood {
    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        let g = GaussianDensity::new(&self.h * x, self.s.clone())?;
        Ok(self.log_c + g.log_pdf(&self.y)?)
    }

    /// Splits into a constant and a peak-normalized log-likelihood
    /// `x ↦ -½ (y - Hx)ᵀ S⁻¹ (y - Hx)`, returned as a quadratic form.
    ///
    /// The constant is `log_c - ½ log|2πS|`.
    pub fn split(&self) -> Result<(f64, LogQuadraticForm)> {
        let chol = cholesky(&self.s, "S")?;
        let constant = self.log_c - 0.5 * (self.y.len() as f64 * LOG_2PI + log_det(&chol));
        let s_inv_h = chol.solve(&self.h);
        let s_inv_y = chol.solve(&self.y);
        let form = LogQuadraticForm::new(
            symmetrize(&(self.h.transpose() * &s_inv_h)),
            self.h.transpose() * &s_inv_y,
            -0.5 * self.y.dot(&s_inv_y),
        )?;
        Ok((constant, form))
    }
}

/// `∫ log{k2(x'|x) / k1(x'|x)} k1(x'|x) dx'` as a Gaussian likelihood in `x`.
///
/// With `k_i = N(A_i x + b_i, Q_i)` the integral equals
/// `log_c + log N(y; H x, Q_2)` where
/// `y = b_2 - b_1`, `H = A_1 - A_2` and
/// `log_c = -½[tr(Q_2⁻¹ Q_1) - d(1 + log 2π) - log|Q_1|]`, `d = dim x'`.
/// The constant is confirmed by a Monte Carlo test of the identity.
pub fn conditional_relative_entropy_likelihood(
    k1: &AffineGaussianKernel,
    k2: &AffineGaussianKernel,
) -> Result<RelativeEntropyLikelihood> {
    check_len(
        "conditional relative entropy (out)",
        k1.dim_out(),
        k2.dim_out(),
    )?;
    check_len(
        "conditional relative entropy (in)",
        k1.dim_in(),
        k2.dim_in(),
    )?;
    let chol1 = cholesky(k1.cov(), "Q1")?;
    let chol2 = cholesky(k2.cov(), "Q2")?;
    let d = k1.dim_out() as f64;
    let trace = chol2.solve(k1.cov()).trace();
    let log_c = -0.5 * (trace - d * (1.0 + LOG_2PI) - log_det(&chol1));
    Ok(RelativeEntropyLikelihood {
        log_c,
        y: k2.offset() - k1.offset(),
        h: k1.slope() - k2.slope(),
        s: k2.cov().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn relative_entropy_examples() {
        let n01 = GaussianDensity::scalar(0.0, 1.0).unwrap();
        assert_eq!(neg_relative_entropy(&n01, &n01).unwrap(), 0.0);
        let n11 = GaussianDensity::scalar(1.0, 1.0).unwrap();
        assert!((neg_relative_entropy(&n11, &n01).unwrap() + 0.5).abs() < 1e-14);
        let n02 = GaussianDensity::scalar(0.0, 2.0).unwrap();
        let expected = -0.5 * (0.5 - 1.0 + 2f64.ln());
        assert!((neg_relative_entropy(&n02, &n01).unwrap() - expected).abs() < 1e-14);
        assert!((expected + 0.096_573_590_279_972_65).abs() < 1e-12);
    }

    #[test]
    fn average_of_single_component() {
        let g = GaussianDensity::scalar(0.7, 1.3).unwrap();
        let (lz, gbar) =
            average_log_gaussians(std::slice::from_ref(&g), &Categorical::uniform(1)).unwrap();
        assert!(lz.abs() < 1e-14);
        assert!((gbar.mean() - g.mean()).amax() < 1e-14);
        assert!((gbar.cov() - g.cov()).amax() < 1e-14);
    }

    #[test]
    fn average_of_shifted_unit_gaussians() {
        let comps = [
            GaussianDensity::scalar(0.0, 1.0).unwrap(),
            GaussianDensity::scalar(2.0, 1.0).unwrap(),
        ];
        let (lz, gbar) = average_log_gaussians(&comps, &Categorical::uniform(2)).unwrap();
        assert!((gbar.mean()[0] - 1.0).abs() < 1e-14);
        assert!((gbar.cov()[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((lz + 0.5).abs() < 1e-13);
        for x in [0.0, 1.0, 3.0] {
            let x = v(&[x]);
            let rhs: f64 = comps.iter().map(|g| 0.5 * g.log_pdf(&x).unwrap()).sum();
            assert!((lz + gbar.log_pdf(&x).unwrap() - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn average_with_different_variances() {
        let comps = [
            GaussianDensity::scalar(0.0, 1.0).unwrap(),
            GaussianDensity::scalar(0.0, 4.0).unwrap(),
        ];
        let (lz, gbar) = average_log_gaussians(&comps, &Categorical::uniform(2)).unwrap();
        assert!((gbar.cov()[(0, 0)] - 1.6).abs() < 1e-14);
        // both sides at x = 0
        let rhs =
            0.5 * (comps[0].log_pdf(&v(&[0.0])).unwrap() + comps[1].log_pdf(&v(&[0.0])).unwrap());
        assert!((lz + gbar.log_pdf(&v(&[0.0])).unwrap() - rhs).abs() < 1e-14);
    }

    #[test]
    fn identical_kernels_give_zero_function() {
        let k = AffineGaussianKernel::new(
            DMatrix::from_row_slice(2, 1, &[0.4, -1.0]),
            v(&[0.2, 0.1]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.7]),
        )
        .unwrap();
        let rel = conditional_relative_entropy_likelihood(&k, &k).unwrap();
        assert!(rel.h.amax() == 0.0 && rel.y.amax() == 0.0);
        for x in [-2.0, 0.0, 1.5] {
            assert!(rel.eval(&v(&[x])).unwrap().abs() < 1e-12);
        }
        let (c, form) = rel.split().unwrap();
        assert!(c.abs() < 1e-12);
        assert!(form.eval(&v(&[3.0])).unwrap().abs() < 1e-15);
    }

    #[test]
    fn pure_mean_shift_is_constant() {
        let k1 = AffineGaussianKernel::scalar(1.0, 0.0, 1.0).unwrap();
        let k2 = AffineGaussianKernel::scalar(1.0, 1.0, 1.0).unwrap();
        let rel = conditional_relative_entropy_likelihood(&k1, &k2).unwrap();
        for x in [-3.0, 0.0, 10.0] {
            assert!((rel.eval(&v(&[x])).unwrap() + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_relative_entropy_matches_monte_carlo() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let k1 = AffineGaussianKernel::scalar(0.8, 0.3, 0.5).unwrap();
        let k2 = AffineGaussianKernel::scalar(-0.4, 1.1, 1.7).unwrap();
        let rel = conditional_relative_entropy_likelihood(&k1, &k2).unwrap();
        for x in [-1.0, 0.4, 2.0] {
            let xv = v(&[x]);
            let n = 200_000;
            let mut acc = 0.0;
            for _ in 0..n {
                let e: f64 = StandardNormal.sample(&mut rng);
                let xp = v(&[0.8 * x + 0.3 + 0.5f64.sqrt() * e]);
                acc += k2.log_density(&xp, &xv).unwrap() - k1.log_density(&xp, &xv).unwrap();
            }
            let mc = acc / n as f64;
            assert!((mc - rel.eval(&xv).unwrap()).abs() < 0.02, "x={x} mc={mc}");
        }
    }
}
