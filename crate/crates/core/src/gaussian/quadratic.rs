use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::density::{AffineGaussianKernel, GaussianDensity};
use super::linalg::{
    check_len, check_symmetric, cholesky, log_det, split_mat, split_vec, symmetrize, LOG_2PI,
};
use crate::error::{Error, Result};

/// The function `x ↦ c + jᵀx − ½ xᵀJx`.
///
/// `J` only has to be symmetric: backward likelihoods are usually improper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogQuadraticForm {
    precision: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
}

impl LogQuadraticForm {
    pub fn new(precision: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Result<Self> {
        check_symmetric(&precision, "quadratic form precision")?;
        check_len("LogQuadraticForm", precision.nrows(), linear.len())?;
        Ok(Self {
            precision: symmetrize(&precision),
            linear,
            constant,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            precision: DMatrix::zeros(dim, dim),
            linear: DVector::zeros(dim),
            constant: 0.0,
        }
    }

    pub fn constant_form(dim: usize, c: f64) -> Self {
        Self {
            constant: c,
            ..Self::zero(dim)
        }
    }

    /// `log N(x; mean, cov)` written as a quadratic form.
    pub fn from_gaussian(g: &GaussianDensity) -> Result<Self> {
        let chol = cholesky(g.cov(), "cov")?;
        let prec = symmetrize(&chol.inverse());
        let linear = &prec * g.mean();
        let constant = -0.5 * (g.dim() as f64 * LOG_2PI + log_det(&chol) + g.mean().dot(&linear));
        Ok(Self {
            precision: prec,
            linear,
            constant,
        })
    }

    /// `x ↦ log N(y; slope x + offset, cov)` for a fixed observation `y`.
    pub fn from_likelihood(kernel: &AffineGaussianKernel, y: &DVector<f64>) -> Result<Self> {
        check_len("likelihood observation", kernel.dim_out(), y.len())?;
        let chol = cholesky(kernel.cov(), "observation cov")?;
        let r = y - kernel.offset();
        let rinv_r = chol.solve(&r);
        let rinv_c = chol.solve(kernel.slope());
        let c = kernel.slope();
        Ok(Self {
            precision: symmetrize(&(c.transpose() * rinv_c)),
            linear: c.transpose() * &rinv_r,
            constant: -0.5 * (y.len() as f64 * LOG_2PI + log_det(&chol) + r.dot(&rinv_r)),
        })
    }

    /// Log-density of an affine-Gaussian kernel as a form over stacked `(x_in, x_out)`.
    pub fn from_kernel_input_first(kernel: &AffineGaussianKernel) -> Result<Self> {
        let din = kernel.dim_in();
        let dout = kernel.dim_out();
        // residual r = [-A, I] (x_in, x_out) - b
        let mut t = DMatrix::zeros(dout, din + dout);
        t.view_mut((0, 0), (dout, din))
            .copy_from(&(-kernel.slope()));
        t.view_mut((0, din), (dout, dout)).fill_with_identity();
        let noise = GaussianDensity::new(DVector::zeros(dout), kernel.cov().clone())?;
        Ok(Self::from_gaussian(&noise)?.substitute(&t, &(-kernel.offset())))
    }

    /// Same as [`Self::from_kernel_input_first`] with the output block first.
    pub fn from_kernel_output_first(kernel: &AffineGaussianKernel) -> Result<Self> {
        let din = kernel.dim_in();
        let dout = kernel.dim_out();
        let mut t = DMatrix::zeros(dout, din + dout);
        t.view_mut((0, 0), (dout, dout)).fill_with_identity();
        t.view_mut((0, dout), (dout, din))
            .copy_from(&(-kernel.slope()));
        let noise = GaussianDensity::new(DVector::zeros(dout), kernel.cov().clone())?;
        Ok(Self::from_gaussian(&noise)?.substitute(&t, &(-kernel.offset())))
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("LogQuadraticForm::eval", self.dim(), x.len())?;
        Ok(self.constant + self.linear.dot(x) - 0.5 * x.dot(&(&self.precision * x)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_len("LogQuadraticForm::add", self.dim(), other.dim())?;
        Ok(Self {
            precision: &self.precision + &other.precision,
            linear: &self.linear + &other.linear,
            constant: self.constant + other.constant,
        })
    }

    pub fn add_constant(&self, c: f64) -> Self {
        Self {
            constant: self.constant + c,
            ..self.clone()
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            precision: &self.precision * s,
            linear: &self.linear * s,
            constant: self.constant * s,
        }
    }

    /// The same form read on coordinates `offset..offset + dim` of a
    /// `total`-dimensional vector.
    pub fn embed(&self, total: usize, offset: usize) -> Self {
        let d = self.dim();
        let mut t = DMatrix::zeros(d, total);
        t.view_mut((0, offset), (d, d)).fill_with_identity();
        self.substitute(&t, &DVector::zeros(d))
    }

    /// The form `u ↦ q(T u + s)`.
    pub fn substitute(&self, t: &DMatrix<f64>, s: &DVector<f64>) -> Self {
        let js = &self.precision * s;
        Self {
            precision: symmetrize(&(t.transpose() * &self.precision * t)),
            linear: t.transpose() * (&self.linear - &js),
            constant: self.constant + self.linear.dot(s) - 0.5 * s.dot(&js),
        }
    }

    /// Expectation over the first block `u` of a form on stacked `(u, v)` when
    /// `u | v ~ kernel`; the result is a form in `v`.
    pub fn expect_first_block(&self, kernel: &AffineGaussianKernel) -> Result<Self> {
        let du = kernel.dim_out();
        let dv = kernel.dim_in();
        check_len("expect_first_block", du + dv, self.dim())?;
        let mut t = DMatrix::zeros(du + dv, dv);
        t.view_mut((0, 0), (du, dv)).copy_from(kernel.slope());
        t.view_mut((du, 0), (dv, dv)).fill_with_identity();
        let mut s = DVector::zeros(du + dv);
        s.rows_mut(0, du).copy_from(kernel.offset());
        let juu = self.precision.view((0, 0), (du, du));
        let trace = (juu * kernel.cov()).trace();
        Ok(self.substitute(&t, &s).add_constant(-0.5 * trace))
    }

    /// Expectation of a form in `u` when `u | v ~ kernel`.
    pub fn expect_under_kernel(&self, kernel: &AffineGaussianKernel) -> Result<Self> {
        check_len("expect_under_kernel", kernel.dim_out(), self.dim())?;
        let trace = (&self.precision * kernel.cov()).trace();
        Ok(self
            .substitute(kernel.slope(), kernel.offset())
            .add_constant(-0.5 * trace))
    }

    /// Expectation under a Gaussian: `E_g[q(x)]`.
    pub fn expect_gaussian(&self, g: &GaussianDensity) -> Result<f64> {
        check_len("expect_gaussian", self.dim(), g.dim())?;
        Ok(self.eval(g.mean())? - 0.5 * (&self.precision * g.cov()).trace())
    }

    /// `log ∫ exp q(u, v) du` over the first `du` coordinates, plus the
    /// conditional of `u` given `v` under the normalized integrand.
    pub fn marginalize_first(&self, du: usize) -> Result<(Self, AffineGaussianKernel)> {
        let (juu, juv, jvu, jvv) = split_mat(&self.precision, du);
        let (ju, jv) = split_vec(&self.linear, du);
        let chol = cholesky(&juu, "conditional precision").map_err(|_| Error::ImproperProduct)?;
        let juu_inv = symmetrize(&chol.inverse());
        let a = &juu_inv * &juv; // Juu^{-1} Juv
        let b = &juu_inv * &ju;
        let precision = symmetrize(&(&jvv - &jvu * &a));
        let linear = &jv - &jvu * &b;
        let constant =
            self.constant + 0.5 * ju.dot(&b) + 0.5 * du as f64 * LOG_2PI - 0.5 * log_det(&chol);
        let kernel = AffineGaussianKernel::new(-a, b, juu_inv)?;
        Ok((
            Self {
                precision,
                linear,
                constant,
            },
            kernel,
        ))
    }

    /// Splits a proper form into `log Z + log N(x; m, P)`.
    pub fn normalize(&self) -> Result<(f64, GaussianDensity)> {
        let chol = cholesky(&self.precision, "representer precision")
            .map_err(|_| Error::ImproperProduct)?;
        let mean = chol.solve(&self.linear);
        let cov = symmetrize(&chol.inverse());
        let log_z =
            self.constant + 0.5 * self.linear.dot(&mean) + 0.5 * self.dim() as f64 * LOG_2PI
                - 0.5 * log_det(&chol);
        Ok((log_z, GaussianDensity::new(mean, cov)?))
    }
}

/// Conjugate combination `exp(lq(x)) N(x; g) = exp(log_norm) N(x; posterior)`.
pub fn quadratic_times_gaussian(
    lq: &LogQuadraticForm,
    g: &GaussianDensity,
) -> Result<(f64, GaussianDensity)> {
    check_len("quadratic_times_gaussian", g.dim(), lq.dim())?;
    let chol_p = cholesky(g.cov(), "prior cov")?;
    let p_inv = symmetrize(&chol_p.inverse());
    let p_inv_m = &p_inv * g.mean();
    let lambda = symmetrize(&(&p_inv + lq.precision()));
    let eta = &p_inv_m + lq.linear();
    let chol_l = cholesky(&lambda, "combined precision").map_err(|_| Error::ImproperProduct)?;
    let mean = chol_l.solve(&eta);
    let cov = symmetrize(&chol_l.inverse());
    let log_norm = lq.constant()
        - 0.5 * g.mean().dot(&p_inv_m)
        - 0.5 * log_det(&chol_p)
        - 0.5 * log_det(&chol_l)
        + 0.5 * eta.dot(&mean);
    Ok((log_norm, GaussianDensity::new(mean, cov)?))
}
