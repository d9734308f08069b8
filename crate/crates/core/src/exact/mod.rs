//! Exact Bayesian baselines: Kalman filtering and smoothing, the IMM filter,
//! and an enumeration oracle for jump systems.

mod brute_force;
mod imm;
mod kalman;
mod system;

pub use brute_force::{
    brute_force_jgm, brute_force_jgm_with_cap, brute_force_smoother, BruteForce,
    BruteForceSmoothing, DEFAULT_PATH_CAP,
};
pub use imm::{imm_filter, moment_match, MixtureFilterResult};
pub use kalman::{
    backward_information_filter, kalman_filter, kalman_update, rts_smoother, two_filter_combine,
    FilterResult, SmootherResult, TwoFilterResult,
};
pub use system::{JumpGMSystem, LinearGaussianSystem};
