//! Gaussian and categorical building blocks.

mod categorical;
mod density;
mod entropy;
pub(crate) mod linalg;
mod quadratic;

pub use categorical::{Categorical, CategoricalKernel};
pub use density::{predict_and_reverse, AffineGaussianKernel, GaussianDensity};
pub use entropy::{
    average_log_gaussians, conditional_relative_entropy_likelihood, neg_relative_entropy,
    RelativeEntropyLikelihood,
};
pub use linalg::{jitter, set_jitter};
pub use quadratic::{quadratic_times_gaussian, LogQuadraticForm};
