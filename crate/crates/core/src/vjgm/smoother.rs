use nalgebra::DVector;

use super::filter::VjgmFilterResult;
use super::step::{filter_update, initial_representer, marginal_objective, StepModel};
use super::types::{ForwardRepresenter, ProductMarginal, ReverseKernelPair, SolverOptions};
use crate::error::{AtTime, Error, Result};
use crate::exact::JumpGMSystem;
use crate::gaussian::linalg::check_len;

/// Factored posterior `f_{0:T} g_{0:T}` stored as terminal marginal plus
/// reverse kernels, with the implied marginals and forward representers.
#[derive(Debug, Clone, PartialEq)]
pub struct VjgmPosterior {
    pub marginals: Vec<ProductMarginal>,
    /// `reverse[t - 1]` maps `t` to `t - 1`.
    pub reverse: Vec<ReverseKernelPair>,
    pub representers: Vec<ForwardRepresenter>,
    pub elbo: f64,
    /// ELBO of the initial posterior followed by one entry per outer iteration.
    pub elbo_trace: Vec<f64>,
    /// Per outer iteration and time step, the objective after each reverse-kernel pass.
    pub inner_traces: Vec<Vec<Vec<f64>>>,
}

impl VjgmPosterior {
    pub fn horizon(&self) -> usize {
        self.marginals.len() - 1
    }
}

/// Marginals implied by a terminal marginal and reverse kernels.
pub fn backward_marginals(
    terminal: &ProductMarginal,
    reverse: &[ReverseKernelPair],
) -> Result<Vec<ProductMarginal>> {
    let n = reverse.len() + 1;
    let mut out = vec![terminal.clone(); n];
    for t in (1..n).rev() {
        out[t - 1] = reverse[t - 1].push(&out[t]).at(t - 1)?;
    }
    Ok(out)
}

/// The posterior defined by a filter run: its terminal marginal and reverse kernels.
pub fn posterior_from_filter(filter: &VjgmFilterResult) -> Result<VjgmPosterior> {
    let reverse: Vec<ReverseKernelPair> = filter.steps[1..]
        .iter()
        .map(|s| s.reverse.clone().expect("t > 0 has reverse kernels"))
        .collect();
    let terminal = &filter.steps[filter.horizon()].marginal;
    let bound = filter.terminal_bound();
    Ok(VjgmPosterior {
        marginals: backward_marginals(terminal, &reverse)?,
        reverse,
        representers: filter.steps.iter().map(|s| s.representer.clone()).collect(),
        elbo: bound,
        elbo_trace: vec![bound],
        inner_traces: Vec::new(),
    })
}

fn objective_at(rep: &ForwardRepresenter, q: &ProductMarginal) -> Result<f64> {
    marginal_objective(rep, q)
}

/// Fixed-point smoother VJGM(k), started from the filter posterior.
///
/// Each outer iteration sweeps forward, re-optimizing every reverse kernel
/// against the current marginal at its time, then updates the terminal
/// marginal and propagates marginals backward.
pub fn fixed_point_smoother(
    sys: &JumpGMSystem,
    y: &[DVector<f64>],
    init: &VjgmFilterResult,
    iters: usize,
) -> Result<VjgmPosterior> {
    fixed_point_smoother_with(sys, y, init, iters, &SolverOptions::default())
}

pub fn fixed_point_smoother_with(
    sys: &JumpGMSystem,
    y: &[DVector<f64>],
    init: &VjgmFilterResult,
    iters: usize,
    opts: &SolverOptions,
) -> Result<VjgmPosterior> {
    sys.check_observations(y)?;
    check_len("filter horizon", sys.horizon, init.horizon())?;
    let mut post = posterior_from_filter(init)?;
    if iters == 0 {
        return Ok(post);
    }
    let rho0 = initial_representer(sys, &y[0])?.representer;
    for _ in 0..iters {
        let mut reps = Vec::with_capacity(sys.horizon + 1);
        reps.push(rho0.clone());
        let mut reverse = Vec::with_capacity(sys.horizon);
        let mut traces = Vec::with_capacity(sys.horizon);
        for t in 1..=sys.horizon {
            let model = StepModel::new(&reps[t - 1], sys, &y[t], t)?;
            let q = &post.marginals[t];
            let mut rev = post.reverse[t - 1].clone();
            let mut rep = model.value_update(&rev)?.representer;
            let mut value = objective_at(&rep, q).at(t)?;
            let mut trace = vec![value];
            for _ in 0..opts.inner_max_iters {
                let rev_new = model.reverse_kernel_update(q, &rev)?;
                let rep_new = model.value_update(&rev_new)?.representer;
                let value_new = objective_at(&rep_new, q).at(t)?;
                // each block maximizes the objective; discard round-off regressions
                if value_new < value {
                    break;
                }
                let delta = value_new - value;
                rev = rev_new;
                rep = rep_new;
                value = value_new;
                trace.push(value);
                if delta < opts.inner_tol {
                    break;
                }
            }
            reps.push(rep);
            reverse.push(rev);
            traces.push(trace);
        }
        let out = filter_update(
            &reps[sys.horizon],
            Some(&post.marginals[sys.horizon]),
            opts.filter_max_iters,
            opts.filter_tol,
        )
        .at(sys.horizon)?;
        post.marginals = backward_marginals(&out.marginal, &reverse)?;
        post.reverse = reverse;
        post.representers = reps;
        post.elbo = out.bound;
        post.elbo_trace.push(out.bound);
        post.inner_traces.push(traces);
    }
    Ok(post)
}

/// Forward representers implied by fixed reverse kernels.
pub fn representers_for(
    sys: &JumpGMSystem,
    y: &[DVector<f64>],
    reverse: &[ReverseKernelPair],
) -> Result<Vec<ForwardRepresenter>> {
    sys.check_observations(y)?;
    check_len("reverse kernels", sys.horizon, reverse.len())?;
    let mut reps = Vec::with_capacity(sys.horizon + 1);
    reps.push(initial_representer(sys, &y[0])?.representer);
    for t in 1..=sys.horizon {
        let model = StepModel::new(&reps[t - 1], sys, &y[t], t)?;
        reps.push(model.value_update(&reverse[t - 1])?.representer);
    }
    Ok(reps)
}

/// `E_q[log U(x_{0:T}, z_{0:T}, y_{0:T}) - log q]` for a factored posterior,
/// evaluated through the forward representers of its reverse kernels.
pub fn elbo(sys: &JumpGMSystem, y: &[DVector<f64>], posterior: &VjgmPosterior) -> Result<f64> {
    if posterior.marginals.len() != sys.horizon + 1 {
        return Err(Error::Dimension {
            context: "posterior horizon",
            expected: sys.horizon + 1,
            got: posterior.marginals.len(),
        });
    }
    let reps = representers_for(sys, y, &posterior.reverse)?;
    objective_at(&reps[sys.horizon], &posterior.marginals[sys.horizon])
}
