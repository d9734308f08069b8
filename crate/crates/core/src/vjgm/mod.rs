//! Variational filtering and smoothing for jump Gauss–Markov systems under
//! the factored family `q(x, z) = f(z) g(x)`.

mod filter;
mod json;
mod smoother;
mod step;
mod types;

pub use filter::{
    collapsed_filter, collapsed_filter_with, suboptimal_filter, suboptimal_filter_with, FilterStep,
    VjgmFilterResult,
};
pub use json::{posterior_to_json, PosteriorJson};
pub use smoother::{
    backward_marginals, elbo, fixed_point_smoother, fixed_point_smoother_with,
    posterior_from_filter, representers_for, VjgmPosterior,
};
pub use step::{
    chain_predict, filter_update, h_dagger, initial_representer, joint_predict_reverse,
    marginal_objective, mix_joint, zeta_dagger, FilterUpdate, StepModel, ValueUpdate,
};
pub use types::{ForwardRepresenter, ProductMarginal, ReverseKernelPair, SolverOptions};
