//! Forward and backward representer recursions on the linear-Gaussian family.
//!
//! The family contains the exact posterior, so every bound here is tight when
//! the optimal kernels are used. The `*_with_kernels` variants accept arbitrary
//! kernels and return the corresponding Jensen lower bounds.

mod posterior;

pub use posterior::GaussMarkovPosterior;

use nalgebra::DVector;

use crate::error::{AtTime, Error, Result};
use crate::exact::LinearGaussianSystem;
use crate::gaussian::linalg::check_len;
use crate::gaussian::{
    predict_and_reverse, AffineGaussianKernel, GaussianDensity, LogQuadraticForm,
};

/// Forward representers `log ρ_t`, their predictive parts `log ρ_t^p`, and the
/// reverse kernels that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSweep {
    pub rho: Vec<LogQuadraticForm>,
    /// `rho_pred[0]` is the initial log-density.
    pub rho_pred: Vec<LogQuadraticForm>,
    /// `reverse_kernels[t - 1]` is `q(x_{t-1} | x_t)`.
    pub reverse_kernels: Vec<AffineGaussianKernel>,
    /// `W_t = E_{q_t}[log ρ_t]` under the supplied marginals.
    pub values: Vec<f64>,
}

/// Backward representers `log β_t` and the forward kernels that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSweep {
    pub beta: Vec<LogQuadraticForm>,
    /// `forward_kernels[t]` is `q(x_{t+1} | x_t)`.
    pub forward_kernels: Vec<AffineGaussianKernel>,
    /// `V_t = E_{q_t}[log β_t]` under the supplied marginals.
    pub values: Vec<f64>,
}

fn check_marginals(sys: &LinearGaussianSystem, marginals: &[GaussianDensity]) -> Result<()> {
    check_len("marginals", sys.horizon() + 1, marginals.len())?;
    for g in marginals {
        check_len("marginal dimension", sys.state_dim(), g.dim())?;
    }
    Ok(())
}

/// `log U_0^0(x) = log π_0(x) + log h_0(y_0 | x)`.
pub fn initial_representer(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
) -> Result<LogQuadraticForm> {
    LogQuadraticForm::from_gaussian(&sys.init)?.add(&LogQuadraticForm::from_likelihood(
        &sys.observations[0],
        &y[0],
    )?)
}

/// `x ↦ E_{rev(x'|x)}[rho_prev(x') + log k(x|x') - log rev(x'|x)]`.
pub fn forward_jensen_step(
    rho_prev: &LogQuadraticForm,
    transition: &AffineGaussianKernel,
    rev: &AffineGaussianKernel,
) -> Result<LogQuadraticForm> {
    let d_prev = rho_prev.dim();
    let total = d_prev + transition.dim_out();
    rho_prev
        .embed(total, 0)
        .add(&LogQuadraticForm::from_kernel_input_first(transition)?)?
        .add(&LogQuadraticForm::from_kernel_output_first(rev)?.scale(-1.0))?
        .expect_first_block(rev)
}

fn forward_sweep_impl(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    marginals: &[GaussianDensity],
    kernels: Option<&[AffineGaussianKernel]>,
) -> Result<ForwardSweep> {
    sys.check_observations(y)?;
    check_marginals(sys, marginals)?;
    if let Some(k) = kernels {
        check_len("reverse kernels", sys.horizon(), k.len())?;
    }
    let n = sys.horizon() + 1;
    let mut rho = Vec::with_capacity(n);
    let mut rho_pred = Vec::with_capacity(n);
    let mut reverse_kernels = Vec::with_capacity(n - 1);
    rho_pred.push(LogQuadraticForm::from_gaussian(&sys.init)?);
    rho.push(initial_representer(sys, y)?);
    for t in 1..n {
        let rev = match kernels {
            Some(k) => k[t - 1].clone(),
            None => {
                let (_, prev) = rho[t - 1].normalize().at(t - 1)?;
                predict_and_reverse(&prev, &sys.transitions[t - 1]).at(t)?.1
            }
        };
        let pred = forward_jensen_step(&rho[t - 1], &sys.transitions[t - 1], &rev).at(t)?;
        let lik = LogQuadraticForm::from_likelihood(&sys.observations[t], &y[t]).at(t)?;
        rho.push(pred.add(&lik)?);
        rho_pred.push(pred);
        reverse_kernels.push(rev);
    }
    let values = rho
        .iter()
        .zip(marginals)
        .map(|(r, q)| r.expect_gaussian(q))
        .collect::<Result<_>>()?;
    Ok(ForwardSweep {
        rho,
        rho_pred,
        reverse_kernels,
        values,
    })
}

/// Forward recursion with the optimizing reverse kernels.
///
/// In this family the optimal reverse kernel is the Bayes reverse of the
/// normalized previous representer, so the representers do not depend on
/// `marginals`; only the reported values do.
pub fn forward_representer_sweep(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    marginals: &[GaussianDensity],
) -> Result<ForwardSweep> {
    forward_sweep_impl(sys, y, marginals, None)
}

/// Forward recursion with fixed reverse kernels; each `log ρ_t` is a pointwise
/// lower bound on `log U_t^{0:t}`.
pub fn forward_representer_sweep_with_kernels(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    marginals: &[GaussianDensity],
    reverse_kernels: &[AffineGaussianKernel],
) -> Result<ForwardSweep> {
    forward_sweep_impl(sys, y, marginals, Some(reverse_kernels))
}

fn backward_sweep_impl(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    marginals: &[GaussianDensity],
    kernels: Option<&[AffineGaussianKernel]>,
) -> Result<BackwardSweep> {
    sys.check_observations(y)?;
    check_marginals(sys, marginals)?;
    if let Some(k) = kernels {
        check_len("forward kernels", sys.horizon(), k.len())?;
    }
    let horizon = sys.horizon();
    let d = sys.state_dim();
    let mut beta = vec![LogQuadraticForm::zero(d); horizon + 1];
    let mut forward_kernels = Vec::with_capacity(horizon);
    for t in (0..horizon).rev() {
        let lik =
            LogQuadraticForm::from_likelihood(&sys.observations[t + 1], &y[t + 1]).at(t + 1)?;
        // stacked (x_{t+1}, x_t)
        let stacked = beta[t + 1].add(&lik)?.embed(2 * d, 0).add(
            &LogQuadraticForm::from_kernel_output_first(&sys.transitions[t])?,
        )?;
        let (form, fwd) = match kernels {
            Some(k) => {
                let f = &k[t];
                let form = stacked
                    .add(&LogQuadraticForm::from_kernel_output_first(f)?.scale(-1.0))?
                    .expect_first_block(f)
                    .at(t)?;
                (form, f.clone())
            }
            None => stacked.marginalize_first(d).at(t)?,
        };
        beta[t] = form;
        forward_kernels.push(fwd);
    }
    forward_kernels.reverse();
    let values = beta
        .iter()
        .zip(marginals)
        .map(|(b, q)| b.expect_gaussian(q))
        .collect::<Result<_>>()?;
    Ok(BackwardSweep {
        beta,
        forward_kernels,
        values,
    })
}

/// Backward recursion with the optimizing forward kernels.
pub fn backward_representer_sweep(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    marginals: &[GaussianDensity],
) -> Result<BackwardSweep> {
    backward_sweep_impl(sys, y, marginals, None)
}

/// Backward recursion with fixed forward kernels; each `log β_t` is a
/// pointwise lower bound on `log h_{t+1:T|t}`.
pub fn backward_representer_sweep_with_kernels(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    marginals: &[GaussianDensity],
    forward_kernels: &[AffineGaussianKernel],
) -> Result<BackwardSweep> {
    backward_sweep_impl(sys, y, marginals, Some(forward_kernels))
}

/// Initial-density step of the backward fixed point: the maximizer of
/// `∫ log{β_0 U_0^0 / q_0} q_0` and the maximum.
pub fn backward_initial_density(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    beta0: &LogQuadraticForm,
) -> Result<(f64, GaussianDensity)> {
    initial_representer(sys, y)?.add(beta0)?.normalize()
}

/// Normalized product `ρ_t β_t`.
pub fn variational_two_filter(
    forward: &ForwardSweep,
    backward: &BackwardSweep,
    t: usize,
) -> Result<GaussianDensity> {
    Ok(forward.rho[t]
        .add(&backward.beta[t])
        .at(t)?
        .normalize()
        .at(t)?
        .1)
}

/// `E_q[log U(x_{0:T}, y_{0:T}) - log q(x_{0:T})]` for a Gauss–Markov posterior.
pub fn elbo(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    posterior: &GaussMarkovPosterior,
) -> Result<f64> {
    let sweep = forward_representer_sweep_with_kernels(
        sys,
        y,
        &posterior.marginals,
        &posterior.reverse_kernels,
    )?;
    let q_t = &posterior.marginals[sys.horizon()];
    Ok(sweep.values[sys.horizon()] + q_t.entropy()?)
}

/// Iterates forward sweeps and backward marginal passes.
///
/// Returns the final posterior and the ELBO after each iteration.
pub fn fixed_point_smoother(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    init_marginals: &[GaussianDensity],
    iters: usize,
) -> Result<(GaussMarkovPosterior, Vec<f64>)> {
    if iters == 0 {
        return Err(Error::invalid(
            "iters",
            "fixed-point smoother needs at least one iteration",
        ));
    }
    let mut marginals = init_marginals.to_vec();
    let mut trace = Vec::with_capacity(iters);
    let mut posterior = None;
    for _ in 0..iters {
        let sweep = forward_representer_sweep(sys, y, &marginals)?;
        let (_, q_t) = sweep.rho[sys.horizon()].normalize().at(sys.horizon())?;
        let post = GaussMarkovPosterior::from_reverse(q_t, sweep.reverse_kernels)?;
        trace.push(elbo(sys, y, &post)?);
        marginals = post.marginals.clone();
        posterior = Some(post);
    }
    Ok((posterior.expect("iters >= 1"), trace))
}

/// One sub-optimal filter step followed by the collapse `ρ_t ≈ κ̂_t q_t`.
///
/// `prev` is `(log κ̂_{t-1}, q_{t-1})` and must be `None` exactly at `t = 0`.
/// Returns `(log κ̂_t, q_t)` with `log κ̂_t = E_{q_t}[log ρ_t - log q_t]`.
pub fn courts_collapse_step(
    prev: Option<(f64, &GaussianDensity)>,
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
    t: usize,
) -> Result<(f64, GaussianDensity)> {
    let rho = match (t, prev) {
        (0, None) => initial_representer(sys, y)?,
        (t, Some((log_kappa, q_prev))) if t > 0 => {
            let transition = &sys.transitions[t - 1];
            let (_, rev) = predict_and_reverse(q_prev, transition).at(t)?;
            let rho_prev = LogQuadraticForm::from_gaussian(q_prev)?.add_constant(log_kappa);
            forward_jensen_step(&rho_prev, transition, &rev)
                .at(t)?
                .add(&LogQuadraticForm::from_likelihood(&sys.observations[t], &y[t]).at(t)?)?
        }
        _ => {
            return Err(Error::invalid(
                "courts_collapse_step",
                "a previous representer is required exactly when t > 0",
            ))
        }
    };
    let (_, q) = rho.normalize().at(t)?;
    let log_kappa = rho.expect_gaussian(&q)? + q.entropy()?;
    Ok((log_kappa, q))
}

/// Runs [`courts_collapse_step`] over the whole horizon.
pub fn courts_filter(
    sys: &LinearGaussianSystem,
    y: &[DVector<f64>],
) -> Result<Vec<(f64, GaussianDensity)>> {
    sys.check_observations(y)?;
    let mut out: Vec<(f64, GaussianDensity)> = Vec::with_capacity(sys.horizon() + 1);
    for t in 0..=sys.horizon() {
        let step = courts_collapse_step(out.last().map(|(k, q)| (*k, q)), sys, y, t)?;
        out.push(step);
    }
    Ok(out)
}
