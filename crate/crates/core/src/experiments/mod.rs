//! The autoregressive staircase study: model, simulation, metrics and the
//! Monte Carlo harness.

mod config;
mod harness;
mod metrics;
mod simulate;
mod staircase;

pub use config::{StaircaseConfig, FULL_SCALE_HORIZON, FULL_SCALE_TRIALS};
pub use harness::{
    metrics_csv, run_experiment, run_trial, smoother_method, write_outputs, ElboImprovement,
    ExperimentOutput, LogOddsInfo, MeanStdErr, MethodSummary, Summary, TrialOutcome, CSV_HEADER,
};
pub use metrics::{
    compute_metrics, log_odds, path_chi2, Estimate, Mode, TrialMetrics, LOG_ODDS_EPS,
};
pub use simulate::{
    rng_for, sample_categorical, sample_gaussian, simulate, simulate_trial, Paths, Stream,
};
pub use staircase::{build_staircase, staircase_chain, staircase_mean};
