use nalgebra::{DMatrix, DVector};

use super::system::LinearGaussianSystem;
use crate::error::{AtTime, Result};
use crate::gaussian::linalg::{cholesky, symmetrize};
use crate::gaussian::{
    predict_and_reverse, quadratic_times_gaussian, AffineGaussianKernel, GaussianDensity,
    LogQuadraticForm,
};

/// Output of [`kalman_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    /// One-step predictive densities; `predicted[0]` is the initial density.
    pub predicted: Vec<GaussianDensity>,
    pub filtered: Vec<GaussianDensity>,
    /// `log h(y_t | y_{0:t-1})`.
    pub log_evidence_increments: Vec<f64>,
    /// `log h_{0:T}`.
    pub log_evidence: f64,
}

impl FilterResult {
    /// `log h_{0:t}`.
    pub fn log_evidence_at(&self, t: usize) -> f64 {
        self.log_evidence_increments[..=t].iter().sum()
    }
}

/// Smoothing marginals with the reverse-time kernels of the exact posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherResult {
    pub marginals: Vec<GaussianDensity>,
    /// `reverse_kernels[t - 1]` is the kernel of `x_{t-1} | x_t, y_{0:T}`.
    pub reverse_kernels: Vec<AffineGaussianKernel>,
}

/// Conjugate observation update in Joseph form.
///
/// Returns the posterior and `log N(y; C m + d, C P Cᵀ + R)`.
pub fn kalman_update(
    prior: &GaussianDensity,
    obs: &AffineGaussianKernel,
    y: &DVector<f64>,
) -> Result<(GaussianDensity, f64)> {
    let c = obs.slope();
    let p = prior.cov();
    let predictive = obs.push(prior)?;
    let chol_s = cholesky(predictive.cov(), "innovation cov")?;
    let log_lik = predictive.log_pdf(y)?;
    let gain = chol_s.solve(&(c * p)).transpose();
    let mean = prior.mean() + &gain * (y - predictive.mean());
    let i_kc = DMatrix::identity(prior.dim(), prior.dim()) - &gain * c;
    let cov = &i_kc * p * i_kc.transpose() + &gain * obs.cov() * gain.transpose();
    Ok((GaussianDensity::new(mean, symmetrize(&cov))?, log_lik))
}

pub fn kalman_filter(sys: &LinearGaussianSystem, y: &[DVector<f64>]) -> Result<FilterResult> {
    sys.check_observations(y)?;
    let n = sys.horizon() + 1;
    let mut predicted = Vec::with_capacity(n);
    let mut filtered: Vec<GaussianDensity> = Vec::with_capacity(n);
    let mut increments = Vec::with_capacity(n);
    for t in 0..n {
        let pred = if t == 0 {
            sys.init.clone()
        } else {
            sys.transitions[t - 1].push(&filtered[t - 1]).at(t)?
        };
        let (post, ll) = kalman_update(&pred, &sys.observations[t], &y[t]).at(t)?;
        predicted.push(pred);
        filtered.push(post);
        increments.push(ll);
    }
    Ok(FilterResult {
        predicted,
        filtered,
        log_evidence: increments.iter().sum(),
        log_evidence_increments: increments,
    })
}

/// Rauch–Tung–Striebel smoother.
pub fn rts_smoother(sys: &LinearGaussianSystem, filter: &FilterResult) -> Result<SmootherResult> {
    let n = filter.filtered.len();
    let mut marginals = filter.filtered.clone();
    let mut reverse_kernels = Vec::with_capacity(n.saturating_sub(1));
    for t in (1..n).rev() {
        let (_, rev) =
            predict_and_reverse(&filter.filtered[t - 1], &sys.transitions[t - 1]).at(t)?;
        marginals[t - 1] = rev.push(&marginals[t]).at(t - 1)?;
        reverse_kernels.push(rev);
    }
    reverse_kernels.reverse();
    Ok(SmootherResult {
        marginals,
        reverse_kernels,
    })
}

/// Backward information filter: `β_t(x) = log h(y_{t+1:T} | x_t = x)`, with `β_T ≡ 0`.
pub fn backward_information_filter(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
) -> Result<Vec<LogQuadraticForm>> {
    sys.check_observations(y)?;
    let horizon = sys.horizon();
    let d = sys.state_dim();
    let mut beta = vec![LogQuadraticForm::zero(d); horizon + 1];
    // embeds a form in x_{t+1} into stacked (x_{t+1}, x_t)
    let mut first = DMatrix::zeros(d, 2 * d);
    first.view_mut((0, 0), (d, d)).fill_with_identity();
    let origin = DVector::zeros(d);
    for t in (0..horizon).rev() {
        let lik =
            LogQuadraticForm::from_likelihood(&sys.observations[t + 1], &y[t + 1]).at(t + 1)?;
        let next = beta[t + 1].add(&lik)?.substitute(&first, &origin);
        let stacked = next.add(&LogQuadraticForm::from_kernel_output_first(
            &sys.transitions[t],
        )?)?;
        let (form, _) = stacked.marginalize_first(d).at(t)?;
        beta[t] = form;
    }
    Ok(beta)
}

/// Normalized products of filtering densities with backward likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFilterResult {
    pub marginals: Vec<GaussianDensity>,
    /// `log ∫ h_{t+1:T|t} U_t^{0:t}`, equal to `log h_{0:T}` at every `t`.
    pub log_normalizers: Vec<f64>,
}

pub fn two_filter_combine(
    forward: &FilterResult,
    backward: &[LogQuadraticForm],
) -> Result<TwoFilterResult> {
    crate::gaussian::linalg::check_len(
        "two_filter_combine",
        forward.filtered.len(),
        backward.len(),
    )?;
    let mut marginals = Vec::with_capacity(backward.len());
    let mut log_normalizers = Vec::with_capacity(backward.len());
    for (t, (filt, beta)) in forward.filtered.iter().zip(backward).enumerate() {
        let (log_norm, post) = quadratic_times_gaussian(beta, filt).at(t)?;
        marginals.push(post);
        log_normalizers.push(log_norm + forward.log_evidence_at(t));
    }
    Ok(TwoFilterResult {
        marginals,
        log_normalizers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system(horizon: usize, a: f64, q: f64, r: f64) -> LinearGaussianSystem {
        LinearGaussianSystem::stationary(
            GaussianDensity::scalar(0.0, 1.0).unwrap(),
            AffineGaussianKernel::scalar(a, 0.0, q).unwrap(),
            AffineGaussianKernel::scalar(1.0, 0.0, r).unwrap(),
            horizon,
        )
        .unwrap()
    }

    fn obs(v: &[f64]) -> Vec<DVector<f64>> {
        v.iter().map(|&x| DVector::from_element(1, x)).collect()
    }

    #[test]
    fn single_conjugate_update() {
        let sys = scalar_system(0, 1.0, 1.0, 1.0);
        let f = kalman_filter(&sys, &obs(&[0.0])).unwrap();
        assert!(f.filtered[0].mean()[0].abs() < 1e-15);
        assert!((f.filtered[0].cov()[(0, 0)] - 0.5).abs() < 1e-15);
        let expected = GaussianDensity::scalar(0.0, 2.0)
            .unwrap()
            .log_pdf(&DVector::zeros(1))
            .unwrap();
        assert!((f.log_evidence - expected).abs() < 1e-14);
        let s = rts_smoother(&sys, &f).unwrap();
        assert_eq!(s.marginals, f.filtered);
    }

    #[test]
    fn uninformative_observation_keeps_prior() {
        let sys = scalar_system(0, 1.0, 1.0, 1e12);
        let f = kalman_filter(&sys, &obs(&[3.0])).unwrap();
        assert!((f.filtered[0].cov()[(0, 0)] - 1.0).abs() < 1e-6);
        assert!(f.filtered[0].mean()[0].abs() < 1e-6);
    }

    #[test]
    fn near_static_state_smooths_back() {
        let sys = scalar_system(1, 1.0, 1e-12, 1.0);
        let f = kalman_filter(&sys, &obs(&[1.0, 1.0])).unwrap();
        let s = rts_smoother(&sys, &f).unwrap();
        assert!((s.marginals[0].mean()[0] - f.filtered[1].mean()[0]).abs() < 1e-5);
    }

    #[test]
    fn one_step_backward_likelihood() {
        let (q, r) = (0.7, 1.3);
        let sys = scalar_system(1, 1.0, q, r);
        let y1 = 0.4;
        let beta = backward_information_filter(&sys, &obs(&[0.0, y1])).unwrap();
        assert_eq!(beta[1], LogQuadraticForm::zero(1));
        for x0 in [-1.0, 0.0, 2.5] {
            let expected = GaussianDensity::scalar(x0, q + r)
                .unwrap()
                .log_pdf(&DVector::from_element(1, y1))
                .unwrap();
            let got = beta[0].eval(&DVector::from_element(1, x0)).unwrap();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn two_filter_matches_rts() {
        let sys = scalar_system(4, 0.8, 0.5, 0.9);
        let y = obs(&[0.3, -0.2, 1.1, 0.4, -0.7]);
        let f = kalman_filter(&sys, &y).unwrap();
        let s = rts_smoother(&sys, &f).unwrap();
        let beta = backward_information_filter(&sys, &y).unwrap();
        let tf = two_filter_combine(&f, &beta).unwrap();
        for t in 0..5 {
            assert!((tf.marginals[t].mean() - s.marginals[t].mean()).amax() < 1e-12);
            assert!((tf.marginals[t].cov() - s.marginals[t].cov()).amax() < 1e-12);
            assert!((tf.log_normalizers[t] - f.log_evidence).abs() < 1e-12);
        }
    }
}
