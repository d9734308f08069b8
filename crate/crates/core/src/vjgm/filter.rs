use nalgebra::DVector;

use super::step::{filter_update, initial_representer, StepModel};
use super::types::{ForwardRepresenter, ProductMarginal, ReverseKernelPair, SolverOptions};
use crate::error::{AtTime, Result};
use crate::exact::JumpGMSystem;

/// Output of one time step of the sub-optimal filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub representer: ForwardRepresenter,
    /// `ρ_t^p`, the representer before the observation at `t`.
    pub predictive: ForwardRepresenter,
    pub marginal: ProductMarginal,
    /// Reverse kernels into `t - 1`; `None` at `t = 0`.
    pub reverse: Option<ReverseKernelPair>,
    /// Evidence lower bound `log h_{0:t} ≥ bound`.
    pub bound: f64,
    /// Bound after each pass of the per-step loop.
    pub inner_trace: Vec<f64>,
    /// Objective traces of every filter update, in order.
    pub filter_traces: Vec<Vec<f64>>,
    pub converged: bool,
}

/// Per-time output of [`suboptimal_filter`] or [`collapsed_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct VjgmFilterResult {
    pub steps: Vec<FilterStep>,
}

impl VjgmFilterResult {
    pub fn bounds(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.bound).collect()
    }

    pub fn terminal_bound(&self) -> f64 {
        self.steps.last().expect("non-empty").bound
    }

    pub fn marginals(&self) -> Vec<ProductMarginal> {
        self.steps.iter().map(|s| s.marginal.clone()).collect()
    }

    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }
}

fn initial_step(sys: &JumpGMSystem, y0: &DVector<f64>, opts: &SolverOptions) -> Result<FilterStep> {
    let init = initial_representer(sys, y0)?;
    let out = filter_update(
        &init.representer,
        None,
        opts.filter_max_iters,
        opts.filter_tol,
    )
    .at(0)?;
    Ok(FilterStep {
        representer: init.representer,
        predictive: init.predictive,
        marginal: out.marginal,
        reverse: None,
        bound: out.bound,
        inner_trace: vec![out.bound],
        filter_traces: vec![out.trace],
        converged: out.converged,
    })
}

/// Per-step coordinate ascent over reverse kernels and the marginal.
fn forward_step(
    prev: &ForwardRepresenter,
    sys: &JumpGMSystem,
    y_t: &DVector<f64>,
    t: usize,
    opts: &SolverOptions,
) -> Result<FilterStep> {
    let model = StepModel::new(prev, sys, y_t, t)?;
    let mut rev = model.initial_reverse()?;
    let mut marginal: Option<ProductMarginal> = None;
    let mut inner_trace = Vec::with_capacity(opts.inner_max_iters);
    let mut filter_traces = Vec::with_capacity(opts.inner_max_iters);
    let mut converged = false;
    let mut last = None;
    for pass in 0..opts.inner_max_iters {
        let values = model.value_update(&rev)?;
        let out = filter_update(
            &values.representer,
            marginal.as_ref(),
            opts.filter_max_iters,
            opts.filter_tol,
        )
        .at(t)?;
        let previous = inner_trace.last().copied();
        inner_trace.push(out.bound);
        filter_traces.push(out.trace);
        marginal = Some(out.marginal);
        last = Some(values);
        if previous.is_some_and(|p: f64| (out.bound - p).abs() < opts.inner_tol) {
            converged = true;
            break;
        }
        if pass + 1 < opts.inner_max_iters {
            rev = model.reverse_kernel_update(marginal.as_ref().expect("set above"), &rev)?;
        }
    }
    if !converged {
        log::debug!(
            "step {t}: inner loop used all {} passes",
            opts.inner_max_iters
        );
    }
    let values = last.expect("inner_max_iters >= 1");
    Ok(FilterStep {
        representer: values.representer,
        predictive: values.predictive,
        marginal: marginal.expect("inner_max_iters >= 1"),
        reverse: Some(rev),
        bound: *inner_trace.last().expect("non-empty"),
        inner_trace,
        filter_traces,
        converged,
    })
}

fn run_filter(
    sys: &JumpGMSystem,
    y: &[DVector<f64>],
    opts: &SolverOptions,
    collapse: bool,
) -> Result<VjgmFilterResult> {
    sys.check_observations(y)?;
    if opts.inner_max_iters == 0 {
        return Err(crate::error::Error::invalid(
            "inner_max_iters",
            "must be at least 1",
        ));
    }
    let mut steps: Vec<FilterStep> = Vec::with_capacity(sys.horizon + 1);
    for (t, yt) in y.iter().enumerate() {
        let mut step = if t == 0 {
            initial_step(sys, yt, opts)?
        } else {
            forward_step(&steps[t - 1].representer, sys, yt, t, opts)?
        };
        if collapse {
            step.representer = ForwardRepresenter {
                log_kappa: step.bound,
                f_star: step.marginal.f.clone(),
                g_star: vec![step.marginal.g.clone(); sys.num_regimes()],
            };
        }
        steps.push(step);
    }
    Ok(VjgmFilterResult { steps })
}

/// Sub-optimal variational filter, VJGM(0).
pub fn suboptimal_filter(sys: &JumpGMSystem, y: &[DVector<f64>]) -> Result<VjgmFilterResult> {
    suboptimal_filter_with(sys, y, &SolverOptions::default())
}

pub fn suboptimal_filter_with(
    sys: &JumpGMSystem,
    y: &[DVector<f64>],
    opts: &SolverOptions,
) -> Result<VjgmFilterResult> {
    run_filter(sys, y, opts, false)
}

/// Sub-optimal filter whose representer is replaced after every step by
/// `exp(bound_t) f_t(z) g_t(x)`.
///
/// The stored `representer` of each step is the collapsed one. The collapsed
/// representer is not a pointwise minorant of the filtering density, so
/// `bound` is an approximation of the log evidence rather than a guaranteed
/// lower bound for `t > 0`.
pub fn collapsed_filter(sys: &JumpGMSystem, y: &[DVector<f64>]) -> Result<VjgmFilterResult> {
    collapsed_filter_with(sys, y, &SolverOptions::default())
}

pub fn collapsed_filter_with(
    sys: &JumpGMSystem,
    y: &[DVector<f64>],
    opts: &SolverOptions,
) -> Result<VjgmFilterResult> {
    run_filter(sys, y, opts, true)
}
