use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{
    block_mat, check_len, check_symmetric, cholesky, log_det, quad_form, spd_inverse, split_mat,
    split_vec, symmetrize, LOG_2PI,
};
use crate::error::{Error, Result};

/// Multivariate normal density in moment form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianDensity {
    /// Validates symmetry and positive definiteness of `cov`.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&cov, "cov")?;
        check_len("GaussianDensity", cov.nrows(), mean.len())?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mean", "non-finite entries"));
        }
        let cov = symmetrize(&cov);
        cholesky(&cov, "cov")?;
        Ok(Self { mean, cov })
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, var),
        )
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
        }
    }

    /// Builds a density from a precision matrix and precision-weighted mean.
    pub fn from_information(precision: &DMatrix<f64>, shift: &DVector<f64>) -> Result<Self> {
        let chol = cholesky(precision, "precision")?;
        let mean = chol.solve(shift);
        let cov = symmetrize(&chol.inverse());
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> Result<DMatrix<f64>> {
        spd_inverse(&self.cov, "cov")
    }

    /// `log N(x; mean, cov)`, evaluated through a Cholesky factor.
    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("log_pdf", self.dim(), x.len())?;
        let chol = cholesky(&self.cov, "cov")?;
        let r = x - &self.mean;
        Ok(-0.5 * (self.dim() as f64 * LOG_2PI + log_det(&chol) + quad_form(&chol, &r)))
    }

    pub fn entropy(&self) -> Result<f64> {
        let chol = cholesky(&self.cov, "cov")?;
        Ok(0.5 * (self.dim() as f64 * (1.0 + LOG_2PI) + log_det(&chol)))
    }

    /// Splits a density over stacked `(u, v)` into `p(v)` and `p(u | v)`.
    pub fn condition_first_on_second(
        &self,
        du: usize,
    ) -> Result<(GaussianDensity, AffineGaussianKernel)> {
        let (mu, mv) = split_vec(&self.mean, du);
        let (suu, suv, _svu, svv) = split_mat(&self.cov, du);
        let chol_v = cholesky(&svv, "marginal cov")?;
        // gain = S_uv S_vv^{-1}
        let gain = chol_v.solve(&suv.transpose()).transpose();
        let offset = &mu - &gain * &mv;
        let cond_cov = symmetrize(&(&suu - &gain * suv.transpose()));
        let marginal = GaussianDensity::new(mv, svv)?;
        let kernel = AffineGaussianKernel::new(gain, offset, cond_cov)?;
        Ok((marginal, kernel))
    }
}

/// Conditional density `x' | x ~ N(slope x + offset, cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineGaussianKernel {
    slope: DMatrix<f64>,
    offset: DVector<f64>,
    cov: DMatrix<f64>,
}

impl AffineGaussianKernel {
    pub fn new(slope: DMatrix<f64>, offset: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&cov, "kernel cov")?;
        check_len("AffineGaussianKernel offset", slope.nrows(), offset.len())?;
        check_len("AffineGaussianKernel cov", slope.nrows(), cov.nrows())?;
        if slope.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("kernel", "non-finite slope or offset"));
        }
        let cov = symmetrize(&cov);
        cholesky(&cov, "kernel cov")?;
        Ok(Self { slope, offset, cov })
    }

    pub fn scalar(slope: f64, offset: f64, var: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, slope),
            DVector::from_element(1, offset),
            DMatrix::from_element(1, 1, var),
        )
    }

    pub fn slope(&self) -> &DMatrix<f64> {
        &self.slope
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim_in(&self) -> usize {
        self.slope.ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.slope.nrows()
    }

    pub fn mean_at(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.slope * x + &self.offset
    }

    pub fn at(&self, x: &DVector<f64>) -> Result<GaussianDensity> {
        check_len("kernel input", self.dim_in(), x.len())?;
        Ok(GaussianDensity {
            mean: self.mean_at(x),
            cov: self.cov.clone(),
        })
    }

    /// `log N(x_out; slope x_in + offset, cov)`.
    pub fn log_density(&self, x_out: &DVector<f64>, x_in: &DVector<f64>) -> Result<f64> {
        check_len("kernel output", self.dim_out(), x_out.len())?;
        self.at(x_in)?.log_pdf(x_out)
    }

    /// Pushes a density through the kernel: `∫ k(x'|x) p(x) dx`.
    pub fn push(&self, p: &GaussianDensity) -> Result<GaussianDensity> {
        check_len("push", self.dim_in(), p.dim())?;
        let mean = &self.slope * p.mean() + &self.offset;
        let cov = symmetrize(&(&self.slope * p.cov() * self.slope.transpose() + &self.cov));
        GaussianDensity::new(mean, cov)
    }

    /// Joint density of `(x, x')` with `x ~ p`, stacked input-first.
    pub fn joint_with(&self, p: &GaussianDensity) -> Result<GaussianDensity> {
        check_len("joint_with", self.dim_in(), p.dim())?;
        let pushed = self.push(p)?;
        let cross = p.cov() * self.slope.transpose();
        let cov = block_mat(p.cov(), &cross, &cross.transpose(), pushed.cov());
        let mean = super::linalg::stack_vec(p.mean(), pushed.mean());
        GaussianDensity::new(mean, symmetrize(&cov))
    }
}

/// Bayes' rule for an affine-Gaussian kernel: `k(x'|x) p(x) = p'(x') r(x|x')`.
///
/// Returns the predictive `p'` and the exact reverse conditional `r`.
pub fn predict_and_reverse(
    prior: &GaussianDensity,
    kernel: &AffineGaussianKernel,
) -> Result<(GaussianDensity, AffineGaussianKernel)> {
    check_len("predict_and_reverse", kernel.dim_in(), prior.dim())?;
    let a = kernel.slope();
    let p = prior.cov();
    let pred_mean = a * prior.mean() + kernel.offset();
    let pred_cov = symmetrize(&(a * p * a.transpose() + kernel.cov()));
    let chol_s = cholesky(&pred_cov, "predictive cov")?;
    // gain = P A^T S^{-1}
    let gain = chol_s.solve(&(a * p)).transpose();
    let offset = prior.mean() - &gain * &pred_mean;
    // information form keeps the reverse covariance positive definite when Q is small
    let q_inv = spd_inverse(kernel.cov(), "kernel cov")?;
    let p_inv = spd_inverse(p, "prior cov")?;
    let rev_prec = symmetrize(&(p_inv + a.transpose() * q_inv * a));
    let rev_cov = spd_inverse(&rev_prec, "reverse precision")?;
    Ok((
        GaussianDensity::new(pred_mean, pred_cov)?,
        AffineGaussianKernel::new(gain, offset, rev_cov)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn log_pdf_standard_normal() {
        let g = GaussianDensity::scalar(0.0, 1.0).unwrap();
        let half_log_2pi = 0.5 * LOG_2PI;
        assert!(close(
            g.log_pdf(&v(&[0.0])).unwrap(),
            -0.918_938_533_204_672_7,
            1e-12
        ));
        assert!(close(
            g.log_pdf(&v(&[1.0])).unwrap(),
            -half_log_2pi - 0.5,
            1e-12
        ));
        let g2 = GaussianDensity::standard(2);
        assert!(close(
            g2.log_pdf(&v(&[1.0, 1.0])).unwrap(),
            -LOG_2PI - 1.0,
            1e-12
        ));
    }

    #[test]
    fn log_pdf_dimension_mismatch() {
        let g = GaussianDensity::standard(2);
        assert!(matches!(
            g.log_pdf(&v(&[1.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn non_pd_covariance_rejected() {
        let err = GaussianDensity::new(
            v(&[0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn predict_and_reverse_scalar_cases() {
        let prior = GaussianDensity::scalar(0.0, 1.0).unwrap();
        let (pred, rev) = predict_and_reverse(
            &prior,
            &AffineGaussianKernel::scalar(1.0, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(close(pred.mean()[0], 0.0, 1e-14) && close(pred.cov()[(0, 0)], 2.0, 1e-14));
        assert!(close(rev.slope()[(0, 0)], 0.5, 1e-14));
        assert!(close(rev.offset()[0], 0.0, 1e-14));
        assert!(close(rev.cov()[(0, 0)], 0.5, 1e-14));

        let (pred, rev) = predict_and_reverse(
            &prior,
            &AffineGaussianKernel::scalar(0.5, 0.0, 0.75).unwrap(),
        )
        .unwrap();
        assert!(close(pred.cov()[(0, 0)], 1.0, 1e-14));
        assert!(close(rev.slope()[(0, 0)], 0.5, 1e-14));
        assert!(close(rev.cov()[(0, 0)], 0.75, 1e-14));
    }

    #[test]
    fn zero_process_noise_rejected() {
        let err = AffineGaussianKernel::scalar(1.0, 0.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn conditioning_recovers_kernel() {
        let prior = GaussianDensity::new(
            v(&[0.3, -1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
        )
        .unwrap();
        let k = AffineGaussianKernel::new(
            DMatrix::from_row_slice(1, 2, &[0.7, -0.4]),
            v(&[0.1]),
            DMatrix::from_element(1, 1, 0.3),
        )
        .unwrap();
        let joint = k.joint_with(&prior).unwrap();
        // condition the output (last) on the input (first two) by reordering
        let perm = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let reordered =
            GaussianDensity::new(&perm * joint.mean(), &perm * joint.cov() * perm.transpose())
                .unwrap();
        let (marg, cond) = reordered.condition_first_on_second(1).unwrap();
        assert!((marg.mean() - prior.mean()).amax() < 1e-12);
        assert!((cond.slope() - k.slope()).amax() < 1e-12);
        assert!((cond.offset() - k.offset()).amax() < 1e-12);
        assert!((cond.cov() - k.cov()).amax() < 1e-12);
    }
}
