use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use vjgm::experiments::{
    build_staircase, run_experiment, simulate_trial, write_outputs, StaircaseConfig,
};
use vjgm::io::PathsJson;
use vjgm::verify::{run_verify, VerifyOptions};
use vjgm::vjgm::{
    fixed_point_smoother, posterior_from_filter, posterior_to_json, suboptimal_filter,
    PosteriorJson,
};

const EXIT_PROPERTY: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "vjgm",
    version,
    about = "Variational state estimation for jump Gauss-Markov systems"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file with staircase parameters; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> vjgm::Result<StaircaseConfig> {
        let mut cfg = match &self.config {
            Some(p) => StaircaseConfig::from_file(p)?,
            None => StaircaseConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample one trial and write paths.json.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Trial index used to key the random streams.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Run VJGM(0) on observed data and write posterior.json.
    Filter {
        #[command(flatten)]
        config: ConfigArgs,
        /// paths.json with at least a "y" array.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the fixed-point smoother VJGM(k) and write posterior.json.
    Smooth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Outer iterations; defaults to smoother_iters from the config.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Monte Carlo study; writes metrics.csv and summary.json.
    Experiment {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        /// Use T=513 and 1000 trials.
        #[arg(long)]
        full_scale: bool,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Oracle property suite on random small systems.
    Verify {
        #[arg(long, default_value_t = 6)]
        max_t: usize,
        #[arg(long, default_value_t = 2)]
        max_m: usize,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long, hide = true, default_value_t = 0.0)]
        inject_kappa_violation: f64,
    },
}

#[derive(Serialize)]
struct FilterOutput {
    #[serde(flatten)]
    posterior: PosteriorJson,
    filter_f: Vec<Vec<f64>>,
    filter_g_mean: Vec<Vec<f64>>,
    filter_g_cov: Vec<Vec<Vec<f64>>>,
    filter_bounds: Vec<f64>,
}

enum Failure {
    Usage(String),
    Property,
}

impl From<vjgm::Error> for Failure {
    fn from(e: vjgm::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn read_data(path: &Path) -> Result<Vec<nalgebra::DVector<f64>>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    PathsJson::from_json_str(&text)
        .and_then(|p| p.observations())
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Usage(format!("cannot write {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let text = serde_json::to_string_pretty(value).map_err(vjgm::Error::from)?;
    std::fs::write(dir.join(name), text + "\n").map_err(io)
}

fn rows<'a>(it: impl Iterator<Item = &'a nalgebra::DMatrix<f64>>) -> Vec<Vec<Vec<f64>>> {
    it.map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
        .collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, out, trial } => {
            let cfg = config.load()?;
            let sys = build_staircase(&cfg)?;
            let paths = simulate_trial(&sys, cfg.seed, trial)?;
            write_json(&out, "paths.json", &PathsJson::from(&paths))?;
        }
        Command::Filter { config, data, out } => {
            let cfg = config.load()?;
            let y = read_data(&data)?;
            let sys = build_staircase(&cfg)?.with_horizon(y.len() - 1);
            let filt = suboptimal_filter(&sys, &y)?;
            let post = posterior_from_filter(&filt)?;
            let steps = &filt.steps;
            let output = FilterOutput {
                posterior: posterior_to_json(&post),
                filter_f: steps
                    .iter()
                    .map(|s| s.marginal.f.probs().to_vec())
                    .collect(),
                filter_g_mean: steps
                    .iter()
                    .map(|s| s.marginal.g.mean().iter().copied().collect())
                    .collect(),
                filter_g_cov: rows(steps.iter().map(|s| s.marginal.g.cov())),
                filter_bounds: filt.bounds(),
            };
            write_json(&out, "posterior.json", &output)?;
            println!("{}", post.elbo);
        }
        Command::Smooth {
            config,
            data,
            out,
            iters,
        } => {
            let cfg = config.load()?;
            let y = read_data(&data)?;
            let sys = build_staircase(&cfg)?.with_horizon(y.len() - 1);
            let filt = suboptimal_filter(&sys, &y)?;
            let post = fixed_point_smoother(&sys, &y, &filt, iters.unwrap_or(cfg.smoother_iters))?;
            write_json(&out, "posterior.json", &posterior_to_json(&post))?;
            println!("{}", post.elbo);
        }
        Command::Experiment {
            config,
            out,
            trials,
            iters,
            full_scale,
            threads,
        } => {
            let mut cfg = config.load()?;
            if full_scale {
                cfg = cfg.full_scale();
            }
            if let Some(n) = trials {
                cfg.trials = n;
            }
            if let Some(k) = iters {
                cfg.smoother_iters = k;
            }
            log::info!(
                "running {} trials at T={} on {} threads",
                cfg.trials,
                cfg.t,
                threads
            );
            let output = run_experiment(&cfg, threads)?;
            write_outputs(&output, &out)?;
            for m in &output.summary.methods {
                println!(
                    "{:<8} {:<10} rmse {:.4}  acc {:.4}  chi2 {:.2}  failed {}",
                    m.method,
                    m.mode.as_str(),
                    m.rmse_x.mean,
                    m.accuracy_z.mean,
                    m.chi2.mean,
                    m.failed
                );
            }
        }
        Command::Verify {
            max_t,
            max_m,
            instances,
            seed,
            iters,
            inject_kappa_violation,
        } => {
            let opts = VerifyOptions {
                max_t,
                max_m,
                instances,
                seed,
                smoother_iters: iters,
                kappa_violation: inject_kappa_violation,
                ..VerifyOptions::default()
            };
            let report = run_verify(&opts)?;
            if report.is_empty() {
                eprintln!("warning: no checks run");
                return Ok(());
            }
            print!("{report}");
            if !report.passed() {
                return Err(Failure::Property);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Property) => ExitCode::from(EXIT_PROPERTY),
    }
}
