use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::StaircaseConfig;
use super::metrics::{compute_metrics, Estimate, Mode, TrialMetrics, LOG_ODDS_EPS};
use super::simulate::simulate_trial;
use super::staircase::build_staircase;
use crate::error::{Error, Result};
use crate::exact::{imm_filter, JumpGMSystem};
use crate::gaussian::{AffineGaussianKernel, Categorical, GaussianDensity};
use crate::vjgm::{fixed_point_smoother, posterior_from_filter, suboptimal_filter, VjgmPosterior};

pub const CSV_HEADER: &str = "trial,method,mode,rmse_x,accuracy_z,log_odds_z,chi2,elbo,failed";

/// Rows of one trial plus the ELBOs of the two VJGM posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub rows: Vec<TrialMetrics>,
    pub elbo_filter: f64,
    pub elbo_smoother: f64,
}

/// Name of the smoother method for `k` outer iterations.
pub fn smoother_method(k: usize) -> String {
    format!("vjgm{k}")
}

fn posterior_estimate(
    post: &VjgmPosterior,
) -> (
    Vec<Categorical>,
    Vec<GaussianDensity>,
    Vec<AffineGaussianKernel>,
) {
    (
        post.marginals.iter().map(|q| q.f.clone()).collect(),
        post.marginals.iter().map(|q| q.g.clone()).collect(),
        post.reverse.iter().map(|r| r.g_rev.clone()).collect(),
    )
}

fn metrics_row(
    trial: usize,
    method: &str,
    mode: Mode,
    elbo: f64,
    z: &[usize],
    x: &[nalgebra::DVector<f64>],
    est: &Estimate<'_>,
) -> TrialMetrics {
    match compute_metrics(z, x, est, mode) {
        Ok((rmse_x, accuracy_z, log_odds_z, chi2)) => TrialMetrics {
            trial,
            method: method.to_string(),
            mode,
            rmse_x,
            accuracy_z,
            log_odds_z,
            chi2,
            elbo,
            failed: false,
        },
        Err(e) => {
            log::warn!("trial {trial} {method}/{}: {e}", mode.as_str());
            TrialMetrics::failed(trial, method, mode)
        }
    }
}

/// Simulates one trial and evaluates IMM, VJGM(0) and VJGM(k).
///
/// Estimator failures become rows with `failed = true`.
pub fn run_trial(sys: &JumpGMSystem, cfg: &StaircaseConfig, trial: usize) -> Result<TrialOutcome> {
    let paths = simulate_trial(sys, cfg.seed, trial as u64)?;
    let (z, x, y) = (&paths.z, &paths.x, &paths.y);
    let k_name = smoother_method(cfg.smoother_iters);
    let mut rows = Vec::with_capacity(4);

    match imm_filter(sys, y) {
        Ok(imm) => {
            let states = (0..=sys.horizon)
                .map(|t| imm.moment_matched(t))
                .collect::<Result<Vec<_>>>();
            match states {
                Ok(states) => {
                    let est = Estimate {
                        regime_probs: &imm.regime_probs,
                        states: &states,
                        reverse_kernels: None,
                    };
                    rows.push(metrics_row(
                        trial,
                        "imm",
                        Mode::Filtering,
                        f64::NAN,
                        z,
                        x,
                        &est,
                    ));
                }
                Err(e) => {
                    log::warn!("trial {trial} imm: {e}");
                    rows.push(TrialMetrics::failed(trial, "imm", Mode::Filtering));
                }
            }
        }
        Err(e) => {
            log::warn!("trial {trial} imm: {e}");
            rows.push(TrialMetrics::failed(trial, "imm", Mode::Filtering));
        }
    }

    let mut elbo_filter = f64::NAN;
    let mut elbo_smoother = f64::NAN;
    let vjgm = suboptimal_filter(sys, y).and_then(|filt| {
        let post0 = posterior_from_filter(&filt)?;
        let postk = fixed_point_smoother(sys, y, &filt, cfg.smoother_iters);
        Ok((filt, post0, postk))
    });
    match vjgm {
        Ok((filt, post0, postk)) => {
            elbo_filter = filt.terminal_bound();
            let probs: Vec<Categorical> = filt.steps.iter().map(|s| s.marginal.f.clone()).collect();
            let states: Vec<GaussianDensity> =
                filt.steps.iter().map(|s| s.marginal.g.clone()).collect();
            let est = Estimate {
                regime_probs: &probs,
                states: &states,
                reverse_kernels: None,
            };
            rows.push(metrics_row(
                trial,
                "vjgm0",
                Mode::Filtering,
                elbo_filter,
                z,
                x,
                &est,
            ));

            let (p0, s0, r0) = posterior_estimate(&post0);
            let est = Estimate {
                regime_probs: &p0,
                states: &s0,
                reverse_kernels: Some(&r0),
            };
            rows.push(metrics_row(
                trial,
                "vjgm0",
                Mode::Smoothing,
                post0.elbo,
                z,
                x,
                &est,
            ));

            match postk {
                Ok(postk) => {
                    elbo_smoother = postk.elbo;
                    let (pk, sk, rk) = posterior_estimate(&postk);
                    let est = Estimate {
                        regime_probs: &pk,
                        states: &sk,
                        reverse_kernels: Some(&rk),
                    };
                    rows.push(metrics_row(
                        trial,
                        &k_name,
                        Mode::Smoothing,
                        postk.elbo,
                        z,
                        x,
                        &est,
                    ));
                }
                Err(e) => {
                    log::warn!("trial {trial} {k_name}: {e}");
                    rows.push(TrialMetrics::failed(trial, &k_name, Mode::Smoothing));
                }
            }
        }
        Err(e) => {
            log::warn!("trial {trial} vjgm: {e}");
            rows.push(TrialMetrics::failed(trial, "vjgm0", Mode::Filtering));
            rows.push(TrialMetrics::failed(trial, "vjgm0", Mode::Smoothing));
            rows.push(TrialMetrics::failed(trial, &k_name, Mode::Smoothing));
        }
    }
    Ok(TrialOutcome {
        rows,
        elbo_filter,
        elbo_smoother,
    })
}

/// Mean and standard error of the finite entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStdErr {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl MeanStdErr {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_err: f64::NAN,
                n,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, std_err, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mode: Mode,
    pub trials: usize,
    pub failed: usize,
    pub rmse_x: MeanStdErr,
    pub accuracy_z: MeanStdErr,
    pub log_odds_z: MeanStdErr,
    pub chi2: MeanStdErr,
    pub elbo: MeanStdErr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsInfo {
    pub base: String,
    pub epsilon: f64,
}

/// Distribution of `ELBO(VJGM(k)) - ELBO(VJGM(0))` over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElboImprovement {
    pub smoother_iters: usize,
    pub summary: MeanStdErr,
    pub min: f64,
    pub max: f64,
    /// Trials where the smoother ELBO fell below the filter ELBO by more than 1e-9.
    pub decreases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: StaircaseConfig,
    /// Degrees of freedom of the reference χ² distribution, `T + 1`.
    pub chi2_df: usize,
    pub log_odds: LogOddsInfo,
    pub methods: Vec<MethodSummary>,
    pub elbo_improvement: ElboImprovement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<TrialMetrics>,
    pub outcomes: Vec<TrialOutcome>,
    pub summary: Summary,
}

fn summarize(cfg: &StaircaseConfig, outcomes: &[TrialOutcome]) -> Summary {
    let rows: Vec<&TrialMetrics> = outcomes.iter().flat_map(|o| &o.rows).collect();
    let mut keys: Vec<(String, Mode)> = Vec::new();
    for r in &rows {
        if !keys.iter().any(|(m, md)| *m == r.method && *md == r.mode) {
            keys.push((r.method.clone(), r.mode));
        }
    }
    let methods = keys
        .into_iter()
        .map(|(method, mode)| {
            let sel: Vec<&&TrialMetrics> = rows
                .iter()
                .filter(|r| r.method == method && r.mode == mode)
                .collect();
            let ok = || sel.iter().filter(|r| !r.failed);
            MethodSummary {
                trials: sel.len(),
                failed: sel.iter().filter(|r| r.failed).count(),
                rmse_x: MeanStdErr::of(ok().map(|r| r.rmse_x)),
                accuracy_z: MeanStdErr::of(ok().map(|r| r.accuracy_z)),
                log_odds_z: MeanStdErr::of(ok().map(|r| r.log_odds_z)),
                chi2: MeanStdErr::of(ok().map(|r| r.chi2)),
                elbo: MeanStdErr::of(ok().map(|r| r.elbo)),
                method,
                mode,
            }
        })
        .collect();
    let diffs: Vec<f64> = outcomes
        .iter()
        .map(|o| o.elbo_smoother - o.elbo_filter)
        .filter(|d| d.is_finite())
        .collect();
    Summary {
        config: cfg.clone(),
        chi2_df: cfg.t + 1,
        log_odds: LogOddsInfo {
            base: "e".into(),
            epsilon: LOG_ODDS_EPS,
        },
        methods,
        elbo_improvement: ElboImprovement {
            smoother_iters: cfg.smoother_iters,
            summary: MeanStdErr::of(diffs.iter().copied()),
            min: diffs.iter().copied().fold(f64::INFINITY, f64::min),
            max: diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            decreases: diffs.iter().filter(|&&d| d < -1e-9).count(),
        },
    }
}

/// Runs all trials on a pool of `threads` workers (0 = rayon default).
///
/// Results are returned in trial order regardless of the thread count.
pub fn run_experiment(cfg: &StaircaseConfig, threads: usize) -> Result<ExperimentOutput> {
    let sys = build_staircase(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_trial(&sys, cfg, trial))
            .collect::<Result<_>>()
    })?;
    let rows = outcomes.iter().flat_map(|o| o.rows.clone()).collect();
    let summary = summarize(cfg, &outcomes);
    Ok(ExperimentOutput {
        rows,
        outcomes,
        summary,
    })
}

/// CSV text with LF line endings and shortest round-trip float formatting.
pub fn metrics_csv(rows: &[TrialMetrics]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.method,
            r.mode.as_str(),
            r.rmse_x,
            r.accuracy_z,
            r.log_odds_z,
            r.chi2,
            r.elbo,
            u8::from(r.failed)
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Writes `metrics.csv` and `summary.json` into `dir`.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(&output.rows))?;
    let json = serde_json::to_string_pretty(&output.summary)?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}
