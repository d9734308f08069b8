//! Single-step operations of the forward recursion.

use nalgebra::{DMatrix, DVector};

use super::types::{ForwardRepresenter, ProductMarginal, ReverseKernelPair};
use crate::error::{AtTime, Error, Result};
use crate::exact::JumpGMSystem;
use crate::gaussian::linalg::{check_len, cholesky, log_det, spd_inverse, symmetrize, LOG_2PI};
use crate::gaussian::{
    average_log_gaussians, conditional_relative_entropy_likelihood, predict_and_reverse,
    quadratic_times_gaussian, AffineGaussianKernel, Categorical, CategoricalKernel,
    GaussianDensity, LogQuadraticForm, RelativeEntropyLikelihood,
};

/// Bayes' rule on the chain: `λ(i|j) f*(j) = f_pred(i) f†(j|i)`.
///
/// A destination with zero predicted mass gets a uniform column in `f†`.
pub fn chain_predict(
    f_prev_star: &Categorical,
    kernel: &CategoricalKernel,
) -> Result<(Categorical, CategoricalKernel)> {
    let m = kernel.size();
    check_len("chain_predict", m, f_prev_star.len())?;
    let log_f = f_prev_star.log_probs();
    let log_cols: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| kernel.prob(i, j).ln() + log_f[j]).collect())
        .collect();
    let log_pred: Vec<f64> = log_cols
        .iter()
        .map(|c| crate::gaussian::linalg::log_sum_exp(c))
        .collect();
    let (_, f_pred) = Categorical::from_log_weights(&log_pred)?;
    let f_dagger = CategoricalKernel::from_log_columns(&log_cols)?;
    Ok((f_pred, f_dagger))
}

/// Per-regime Bayes reverse of the state kernels against `g*_{t-1}`.
pub fn joint_predict_reverse(
    g_star_prev: &[GaussianDensity],
    state_kernels: &[AffineGaussianKernel],
) -> Result<Vec<(GaussianDensity, AffineGaussianKernel)>> {
    check_len(
        "joint_predict_reverse",
        g_star_prev.len(),
        state_kernels.len(),
    )?;
    g_star_prev
        .iter()
        .zip(state_kernels)
        .map(|(g, k)| predict_and_reverse(g, k))
        .collect()
}

/// Joint density over stacked `(x_{t-1}, x_t)` from a predictive and reverse kernel.
fn stacked_joint(pred: &GaussianDensity, rev: &AffineGaussianKernel) -> Result<GaussianDensity> {
    let d = pred.dim();
    let a = rev.slope();
    let p = pred.cov();
    let mut cov = DMatrix::zeros(2 * d, 2 * d);
    cov.view_mut((0, 0), (d, d))
        .copy_from(&(a * p * a.transpose() + rev.cov()));
    let cross = a * p;
    cov.view_mut((0, d), (d, d)).copy_from(&cross);
    cov.view_mut((d, 0), (d, d)).copy_from(&cross.transpose());
    cov.view_mut((d, d), (d, d)).copy_from(p);
    let mut mean = DVector::zeros(2 * d);
    mean.rows_mut(0, d).copy_from(&rev.mean_at(pred.mean()));
    mean.rows_mut(d, d).copy_from(pred.mean());
    GaussianDensity::new(mean, symmetrize(&cov))
}

/// Averages the per-regime joint log-densities with weights from column `z_t`
/// of `f_rev` and refactors the result.
///
/// Returns `(log η, g†, g^p)` with
/// `log{η g†(x_{t-1}|x_t) g^p(x_t)} = Σ_{z'} f_rev(z'|z_t) log{g̃^p(x_t|z') g̃(x_{t-1}|x_t,z')}`.
pub fn mix_joint(
    g_tilde: &[(GaussianDensity, AffineGaussianKernel)],
    f_rev: &CategoricalKernel,
    z_t: usize,
) -> Result<(f64, AffineGaussianKernel, GaussianDensity)> {
    let d = g_tilde
        .first()
        .ok_or_else(|| Error::invalid("mix_joint", "no regimes"))?
        .0
        .dim();
    let joints = g_tilde
        .iter()
        .map(|(p, r)| stacked_joint(p, r))
        .collect::<Result<Vec<_>>>()?;
    let (log_eta, joint) = average_log_gaussians(&joints, &f_rev.column(z_t))?;
    let (g_pred, g_dagger) = joint.condition_first_on_second(d)?;
    Ok((log_eta, g_dagger, g_pred))
}

/// `log ζ†(z) = Σ_{z'} f_rev(z'|z) log{f†(z'|z) / f_rev(z'|z)}` per destination `z`.
///
/// An entry is `-inf` when `f_rev` puts mass where `f†` has none.
pub fn zeta_dagger(
    f_rev: &CategoricalKernel,
    f_rev_dagger: &CategoricalKernel,
) -> Result<Vec<f64>> {
    check_len("zeta_dagger", f_rev.size(), f_rev_dagger.size())?;
    let m = f_rev.size();
    Ok((0..m)
        .map(|z| {
            (0..m)
                .map(|zp| {
                    let f = f_rev.prob(zp, z);
                    let fd = f_rev_dagger.prob(zp, z);
                    if f == 0.0 {
                        0.0
                    } else if fd == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        f * (fd / f).ln()
                    }
                })
                .sum()
        })
        .collect())
}

/// `∫ log{g†(x'|x) / g_rev(x'|x)} g_rev(x'|x) dx' = log η† + h†(x)`.
///
/// `h†(x) = -½ (y - Hx)ᵀ S⁻¹ (y - Hx)` with `H = A† - A`, `y = b - b†` and
/// `S` the covariance of `g†`; the returned likelihood carries these
/// together with `log c = log η† + ½ log|2πS|`.
pub fn h_dagger(
    g_dagger_rev: &AffineGaussianKernel,
    g_rev: &AffineGaussianKernel,
) -> Result<(f64, LogQuadraticForm, RelativeEntropyLikelihood)> {
    let rel = conditional_relative_entropy_likelihood(g_rev, g_dagger_rev)?;
    // N(y; Hx, S) is unchanged by flipping the signs of y and H
    let rel = RelativeEntropyLikelihood {
        y: -rel.y,
        h: -rel.h,
        ..rel
    };
    let (log_eta, form) = rel.split()?;
    Ok((log_eta, form, rel))
}

/// Per-regime quantities cached for one time step.
#[derive(Debug, Clone)]
struct RegimeJoint {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_det_cov: f64,
    rev_precision: DMatrix<f64>,
    rev_precision_slope: DMatrix<f64>,
    rev_precision_offset: DVector<f64>,
    pred: GaussianDensity,
    rev: AffineGaussianKernel,
}

/// Everything the step at time `t` needs from `ρ_{t-1}`, the model and `y_t`.
#[derive(Debug, Clone)]
pub struct StepModel {
    t: usize,
    d: usize,
    log_kappa_prev: f64,
    f_star_prev: Categorical,
    f_pred: Categorical,
    f_dagger: CategoricalKernel,
    regimes: Vec<RegimeJoint>,
    obs_forms: Vec<LogQuadraticForm>,
}

/// Result of [`StepModel::value_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueUpdate {
    pub representer: ForwardRepresenter,
    /// `ρ_t` divided by the observation likelihood.
    pub predictive: ForwardRepresenter,
}

impl StepModel {
    pub fn new(
        prev: &ForwardRepresenter,
        sys: &JumpGMSystem,
        y_t: &DVector<f64>,
        t: usize,
    ) -> Result<Self> {
        Self::build(prev, sys, y_t, t).at(t)
    }

    fn build(
        prev: &ForwardRepresenter,
        sys: &JumpGMSystem,
        y_t: &DVector<f64>,
        t: usize,
    ) -> Result<Self> {
        let (f_pred, f_dagger) = chain_predict(&prev.f_star, &sys.chain_kernel)?;
        let pairs = joint_predict_reverse(&prev.g_star, &sys.state_kernels)?;
        let mut regimes = Vec::with_capacity(pairs.len());
        for (pred, rev) in pairs {
            let joint = stacked_joint(&pred, &rev)?;
            let chol = cholesky(joint.cov(), "regime joint cov")?;
            let rev_precision = spd_inverse(rev.cov(), "regime reverse cov")?;
            regimes.push(RegimeJoint {
                mean: joint.mean().clone(),
                precision: symmetrize(&chol.inverse()),
                log_det_cov: log_det(&chol),
                rev_precision_slope: &rev_precision * rev.slope(),
                rev_precision_offset: &rev_precision * rev.offset(),
                rev_precision,
                pred,
                rev,
            });
        }
        let obs_forms = sys
            .obs_kernels
            .iter()
            .map(|k| LogQuadraticForm::from_likelihood(k, y_t))
            .collect::<Result<_>>()?;
        Ok(Self {
            t,
            d: sys.state_dim(),
            log_kappa_prev: prev.log_kappa,
            f_star_prev: prev.f_star.clone(),
            f_pred,
            f_dagger,
            regimes,
            obs_forms,
        })
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn f_pred(&self) -> &Categorical {
        &self.f_pred
    }

    pub fn f_dagger(&self) -> &CategoricalKernel {
        &self.f_dagger
    }

    /// Per-regime `(g̃^p_t, g̃_{t-1|t})`.
    pub fn regime_pairs(&self) -> Vec<(GaussianDensity, AffineGaussianKernel)> {
        self.regimes
            .iter()
            .map(|r| (r.pred.clone(), r.rev.clone()))
            .collect()
    }

    fn num_regimes(&self) -> usize {
        self.regimes.len()
    }

    /// Cached equivalent of [`mix_joint`].
    fn mix(&self, weights: &[f64]) -> Result<(f64, AffineGaussianKernel, GaussianDensity)> {
        let dd = 2 * self.d;
        let mut precision = DMatrix::zeros(dd, dd);
        let mut shift = DVector::zeros(dd);
        for (r, &w) in self.regimes.iter().zip(weights) {
            if w > 0.0 {
                precision += &r.precision * w;
                shift += &r.precision * &r.mean * w;
            }
        }
        let precision = symmetrize(&precision);
        let chol = cholesky(&precision, "averaged joint precision")?;
        let mean = chol.solve(&shift);
        let mut log_eta = 0.5 * (dd as f64 * LOG_2PI - log_det(&chol));
        for (r, &w) in self.regimes.iter().zip(weights) {
            if w > 0.0 {
                let diff = &mean - &r.mean;
                let maha = diff.dot(&(&r.precision * &diff));
                log_eta -= 0.5 * w * (dd as f64 * LOG_2PI + r.log_det_cov + maha);
            }
        }
        let joint = GaussianDensity::new(mean, symmetrize(&chol.inverse()))?;
        let (g_pred, g_dagger) = joint.condition_first_on_second(self.d)?;
        Ok((log_eta, g_dagger, g_pred))
    }

    /// Shared Gaussian reverse kernel from weights over source regimes.
    fn average_reverse(&self, weights: &[f64]) -> Result<AffineGaussianKernel> {
        let d = self.d;
        let mut precision = DMatrix::zeros(d, d);
        let mut slope = DMatrix::zeros(d, d);
        let mut offset = DVector::zeros(d);
        for (r, &w) in self.regimes.iter().zip(weights) {
            if w > 0.0 {
                precision += &r.rev_precision * w;
                slope += &r.rev_precision_slope * w;
                offset += &r.rev_precision_offset * w;
            }
        }
        let chol = cholesky(&symmetrize(&precision), "reverse kernel precision")?;
        AffineGaussianKernel::new(
            chol.solve(&slope),
            chol.solve(&offset),
            symmetrize(&chol.inverse()),
        )
    }

    /// Reverse kernels before any variational quantity exists:
    /// `f_rev = f†` and the Gaussian kernel averaged with weights `f*_{t-1}`.
    pub fn initial_reverse(&self) -> Result<ReverseKernelPair> {
        Ok(ReverseKernelPair {
            f_rev: self.f_dagger.clone(),
            g_rev: self.average_reverse(self.f_star_prev.probs()).at(self.t)?,
        })
    }

    /// Forward representer `ρ_t` for fixed reverse kernels.
    pub fn value_update(&self, rev: &ReverseKernelPair) -> Result<ValueUpdate> {
        self.value_update_inner(rev).at(self.t)
    }

    fn value_update_inner(&self, rev: &ReverseKernelPair) -> Result<ValueUpdate> {
        let m = self.num_regimes();
        check_len("value_update reverse kernel", m, rev.f_rev.size())?;
        let log_zeta_dagger = zeta_dagger(&rev.f_rev, &self.f_dagger)?;
        let mut log_w = Vec::with_capacity(m);
        let mut log_w_pred = Vec::with_capacity(m);
        let mut g_star = Vec::with_capacity(m);
        let mut g_pred_star = Vec::with_capacity(m);
        for z in 0..m {
            let f_p = self.f_pred.probs()[z];
            let column: Vec<f64> = (0..m).map(|zp| rev.f_rev.prob(zp, z)).collect();
            let (log_eta, g_dagger, g_pred) = self.mix(&column)?;
            let (log_eta_dagger, h_form, _) = h_dagger(&g_dagger, &rev.g_rev)?;
            let base = f_p.ln() + log_zeta_dagger[z] + log_eta + log_eta_dagger;
            let (log_c_pred, gp_star) = quadratic_times_gaussian(&h_form, &g_pred)?;
            let (log_h_bar, gs) =
                quadratic_times_gaussian(&self.obs_forms[z].add(&h_form)?, &g_pred)?;
            log_w.push(base + log_h_bar);
            log_w_pred.push(base + log_c_pred);
            g_star.push(gs);
            g_pred_star.push(gp_star);
        }
        let (lse, f_star) = Categorical::from_log_weights(&log_w)?;
        let (lse_pred, f_pred_star) = Categorical::from_log_weights(&log_w_pred)?;
        Ok(ValueUpdate {
            representer: ForwardRepresenter {
                log_kappa: self.log_kappa_prev + lse,
                f_star,
                g_star,
            },
            predictive: ForwardRepresenter {
                log_kappa: self.log_kappa_prev + lse_pred,
                f_star: f_pred_star,
                g_star: g_pred_star,
            },
        })
    }

    /// One joint pass of the reverse-kernel fixed-point equations against the
    /// marginal `current`: `f_rev ∝ ζ_{t-1} f†`, then the Gaussian kernel with
    /// weights `Σ_z f_rev(z'|z) f_t(z)`.
    pub fn reverse_kernel_update(
        &self,
        current: &ProductMarginal,
        rev: &ReverseKernelPair,
    ) -> Result<ReverseKernelPair> {
        self.reverse_kernel_update_inner(current, rev).at(self.t)
    }

    fn reverse_kernel_update_inner(
        &self,
        current: &ProductMarginal,
        rev: &ReverseKernelPair,
    ) -> Result<ReverseKernelPair> {
        let m = self.num_regimes();
        let dd = 2 * self.d;
        let q_joint = stacked_joint(&current.g, &rev.g_rev)?;
        let log_det_q = log_det(&cholesky(q_joint.cov(), "reverse joint cov")?);
        // log ζ_{t-1}(z') = ∫ log{joint_z' / q_joint} q_joint
        let log_zeta: Vec<f64> = self
            .regimes
            .iter()
            .map(|r| {
                let diff = &r.mean - q_joint.mean();
                let trace = (&r.precision * q_joint.cov()).trace();
                -0.5 * (trace - dd as f64 + diff.dot(&(&r.precision * &diff)) + r.log_det_cov
                    - log_det_q)
            })
            .collect();
        let log_cols: Vec<Vec<f64>> = (0..m)
            .map(|z| {
                (0..m)
                    .map(|zp| log_zeta[zp] + self.f_dagger.prob(zp, z).ln())
                    .collect()
            })
            .collect();
        let f_rev = CategoricalKernel::from_log_columns(&log_cols)?;
        let weights: Vec<f64> = (0..m)
            .map(|zp| {
                (0..m)
                    .map(|z| f_rev.prob(zp, z) * current.f.probs()[z])
                    .sum()
            })
            .collect();
        let g_rev = self.average_reverse(&weights)?;
        Ok(ReverseKernelPair { f_rev, g_rev })
    }
}

/// Result of [`filter_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterUpdate {
    pub marginal: ProductMarginal,
    /// `Σ_z f (log ξ + log f* - log f) + log κ` at the returned marginal.
    pub bound: f64,
    /// Objective after each pass (preceded by the warm-start value, if any).
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Cached precision data of the per-regime Gaussians of a representer.
struct StarCache {
    precision: Vec<DMatrix<f64>>,
    shift: Vec<DVector<f64>>,
    log_det_cov: Vec<f64>,
}

impl StarCache {
    fn new(rep: &ForwardRepresenter) -> Result<Self> {
        let mut precision = Vec::new();
        let mut shift = Vec::new();
        let mut log_det_cov = Vec::new();
        for g in &rep.g_star {
            let chol = cholesky(g.cov(), "g_star cov")?;
            let p = symmetrize(&chol.inverse());
            shift.push(&p * g.mean());
            precision.push(p);
            log_det_cov.push(log_det(&chol));
        }
        Ok(Self {
            precision,
            shift,
            log_det_cov,
        })
    }

    /// `log ξ(z) = ∫ log{g*(x|z) / g(x)} g(x) dx`.
    fn log_xi(&self, rep: &ForwardRepresenter, g: &GaussianDensity) -> Result<Vec<f64>> {
        let d = g.dim() as f64;
        let log_det_g = log_det(&cholesky(g.cov(), "g cov")?);
        Ok((0..rep.g_star.len())
            .map(|z| {
                let p = &self.precision[z];
                let diff = rep.g_star[z].mean() - g.mean();
                -0.5 * ((p * g.cov()).trace() - d + diff.dot(&(p * &diff)) + self.log_det_cov[z]
                    - log_det_g)
            })
            .collect())
    }

    fn g_update(&self, f: &Categorical) -> Result<GaussianDensity> {
        let d = self.shift[0].len();
        let mut precision = DMatrix::zeros(d, d);
        let mut shift = DVector::zeros(d);
        for (z, &w) in f.probs().iter().enumerate() {
            if w > 0.0 {
                precision += &self.precision[z] * w;
                shift += &self.shift[z] * w;
            }
        }
        GaussianDensity::from_information(&symmetrize(&precision), &shift)
    }
}

fn objective(rep: &ForwardRepresenter, f: &Categorical, log_xi: &[f64]) -> f64 {
    let mut total = rep.log_kappa;
    for (z, &w) in f.probs().iter().enumerate() {
        if w > 0.0 {
            total += w * (log_xi[z] + rep.f_star.probs()[z].ln() - w.ln());
        }
    }
    total
}

/// Coordinate ascent for the marginal `q_t = f_t g_t` maximizing
/// `Σ_z ∫ log{ρ_t / (f g)} g f`.
///
/// Alternates `f ∝ ξ f*` and the precision-averaged `g`. A warm start makes
/// the returned objective at least the objective of `warm`.
pub fn filter_update(
    rep: &ForwardRepresenter,
    warm: Option<&ProductMarginal>,
    max_iters: usize,
    tol: f64,
) -> Result<FilterUpdate> {
    if max_iters == 0 || !(tol > 0.0) {
        return Err(Error::invalid(
            "filter_update",
            "need max_iters >= 1 and tol > 0",
        ));
    }
    let cache = StarCache::new(rep)?;
    let mut trace = Vec::with_capacity(max_iters + 1);
    let (mut f, mut g) = match warm {
        Some(w) => {
            let xi = cache.log_xi(rep, &w.g)?;
            trace.push(objective(rep, &w.f, &xi));
            (w.f.clone(), w.g.clone())
        }
        None => (rep.f_star.clone(), cache.g_update(&rep.f_star)?),
    };
    let mut converged = false;
    for _ in 0..max_iters {
        let xi = cache.log_xi(rep, &g)?;
        let log_w: Vec<f64> = xi
            .iter()
            .zip(rep.f_star.probs())
            .map(|(x, p)| x + p.ln())
            .collect();
        let f_new = Categorical::from_log_weights(&log_w)?.1;
        let g_new = cache.g_update(&f_new)?;
        let value = objective(rep, &f_new, &cache.log_xi(rep, &g_new)?);
        let previous = trace.last().copied();
        // coordinate ascent cannot decrease the objective; keep the old iterate on round-off
        if previous.is_some_and(|p| value < p) {
            converged = true;
            break;
        }
        f = f_new;
        g = g_new;
        trace.push(value);
        if previous.is_some_and(|p| (value - p).abs() < tol) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("filter update stopped after {max_iters} passes without converging");
    }
    let bound = *trace.last().expect("at least one pass");
    Ok(FilterUpdate {
        marginal: ProductMarginal { f, g },
        bound,
        trace,
        converged,
    })
}

/// `Σ_z f (log ξ + log f* - log f) + log κ` for an arbitrary product marginal.
pub fn marginal_objective(rep: &ForwardRepresenter, q: &ProductMarginal) -> Result<f64> {
    let cache = StarCache::new(rep)?;
    Ok(objective(rep, &q.f, &cache.log_xi(rep, &q.g)?))
}

/// `ρ_0 = U_0^0`: `f*_0 ∝ λ_0 h̄_0`, `g*_0(·|z)` the conjugate posterior.
pub fn initial_representer(sys: &JumpGMSystem, y0: &DVector<f64>) -> Result<ValueUpdate> {
    let m = sys.num_regimes();
    let mut log_w = Vec::with_capacity(m);
    let mut g_star = Vec::with_capacity(m);
    for z in 0..m {
        let lik = LogQuadraticForm::from_likelihood(&sys.obs_kernels[z], y0).at(0)?;
        let (log_h_bar, g) = quadratic_times_gaussian(&lik, &sys.state_init[z]).at(0)?;
        log_w.push(sys.chain_init.probs()[z].ln() + log_h_bar);
        g_star.push(g);
    }
    let (lse, f_star) = Categorical::from_log_weights(&log_w).at(0)?;
    Ok(ValueUpdate {
        representer: ForwardRepresenter {
            log_kappa: lse,
            f_star,
            g_star,
        },
        predictive: ForwardRepresenter {
            log_kappa: 0.0,
            f_star: sys.chain_init.clone(),
            g_star: sys.state_init.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn permutation_chain() {
        let k = CategoricalKernel::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        let (fp, fd) = chain_predict(&Categorical::one_hot(3, 0), &k).unwrap();
        assert_eq!(fp.probs(), &[0.0, 1.0, 0.0]);
        assert_eq!(fd.column(1).probs(), &[1.0, 0.0, 0.0]);
        // unreachable destinations get uniform columns
        assert!((fd.prob(0, 0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zeta_dagger_values() {
        let f =
            CategoricalKernel::new(DMatrix::from_row_slice(2, 2, &[0.25, 0.5, 0.75, 0.5])).unwrap();
        let fd =
            CategoricalKernel::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        let z = zeta_dagger(&f, &fd).unwrap();
        let expected = 0.25 * (0.5f64 / 0.25).ln() + 0.75 * (0.5f64 / 0.75).ln();
        assert!((z[0] - expected).abs() < 1e-15);
        assert_eq!(z[1], 0.0);
        let fd0 =
            CategoricalKernel::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.5])).unwrap();
        let f1 = CategoricalKernel::new(DMatrix::from_row_slice(2, 2, &[0.999, 0.5, 0.001, 0.5]))
            .unwrap();
        assert_eq!(zeta_dagger(&f1, &fd0).unwrap()[0], f64::NEG_INFINITY);
    }

    #[test]
    fn h_dagger_examples() {
        let k = AffineGaussianKernel::scalar(0.4, 0.2, 0.7).unwrap();
        let (c, form, _) = h_dagger(&k, &k).unwrap();
        assert!(c.abs() < 1e-12 && form.eval(&v(&[1.3])).unwrap().abs() < 1e-12);

        let g = AffineGaussianKernel::scalar(1.0, 0.0, 1.0).unwrap();
        let gd = AffineGaussianKernel::scalar(1.0, 1.0, 1.0).unwrap();
        let (c, form, rel) = h_dagger(&gd, &g).unwrap();
        assert_eq!(rel.h[(0, 0)], 0.0);
        for x in [-2.0, 0.5] {
            assert!((c + form.eval(&v(&[x])).unwrap() + 0.5).abs() < 1e-12);
        }

        let gd = AffineGaussianKernel::scalar(0.5, 0.0, 1.0).unwrap();
        let g = AffineGaussianKernel::scalar(0.4, 0.0, 1.0).unwrap();
        let (_, _, rel) = h_dagger(&gd, &g).unwrap();
        assert!((rel.h[(0, 0)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mix_joint_single_regime() {
        let pair = predict_and_reverse(
            &GaussianDensity::scalar(0.0, 1.0).unwrap(),
            &AffineGaussianKernel::scalar(1.0, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        let other = predict_and_reverse(
            &GaussianDensity::scalar(3.0, 2.0).unwrap(),
            &AffineGaussianKernel::scalar(0.5, 1.0, 0.3).unwrap(),
        )
        .unwrap();
        let f =
            CategoricalKernel::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.5])).unwrap();
        let (le, gd, gp) = mix_joint(&[pair.clone(), other], &f, 0).unwrap();
        assert!(le.abs() < 1e-12);
        assert!((gp.cov()[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((gd.slope()[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((gd.cov()[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn filter_update_single_regime() {
        let rep = ForwardRepresenter {
            log_kappa: -1.5,
            f_star: Categorical::uniform(1),
            g_star: vec![GaussianDensity::scalar(0.3, 0.8).unwrap()],
        };
        let out = filter_update(&rep, None, 10, 1e-12).unwrap();
        assert!((out.bound + 1.5).abs() < 1e-14);
        assert_eq!(out.marginal.g.mean(), rep.g_star[0].mean());
    }
}
