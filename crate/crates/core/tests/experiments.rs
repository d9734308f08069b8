use vjgm::experiments::*;
use vjgm::Error;

fn small(trials: usize, t: usize) -> StaircaseConfig {
    StaircaseConfig {
        trials,
        t,
        smoother_iters: 3,
        ..StaircaseConfig::default()
    }
}

#[test]
fn toml_uses_field_names_and_aliases() {
    let cfg =
        StaircaseConfig::from_toml_str("M = 3\np = 0.8\nT = 17\ntrials = 5\nseed = 9\n").unwrap();
    assert_eq!((cfg.m, cfg.t, cfg.trials, cfg.seed), (3, 17, 5, 9));
    assert_eq!(cfg.r, 1.0);
    let cfg = StaircaseConfig::from_toml_str("m = 2\nsmoother_iters = 4\n").unwrap();
    assert_eq!((cfg.m, cfg.smoother_iters), (2, 4));
}

#[test]
fn bad_configs_are_rejected() {
    for text in [
        "p = 1.0",
        "phi0 = 1.0",
        "r = 0.0",
        "m = 0",
        "unknown = 1",
        "mu0_rule = \"zero\"",
        "p = \"x\"",
    ] {
        assert!(
            matches!(StaircaseConfig::from_toml_str(text), Err(Error::Config(_))),
            "{text} should fail"
        );
    }
}

#[test]
fn missing_file_names_the_path() {
    let err =
        StaircaseConfig::from_file(std::path::Path::new("/nonexistent/cfg.toml")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/cfg.toml"));
}

#[test]
fn full_scale_switches_horizon_and_trials() {
    let cfg = StaircaseConfig::default().full_scale();
    assert_eq!((cfg.t, cfg.trials), (513, 1000));
}

#[test]
fn staircase_has_the_documented_structure() {
    let sys = build_staircase(&StaircaseConfig::default()).unwrap();
    assert_eq!(sys.num_regimes(), 4);
    for (z, k) in sys.state_kernels.iter().enumerate() {
        // stationary mean z and stationary variance sigma0^2
        let mu = k.offset()[0] / (1.0 - k.slope()[(0, 0)]);
        assert!((mu - z as f64).abs() < 1e-12);
        let var = k.cov()[(0, 0)] / (1.0 - k.slope()[(0, 0)].powi(2));
        assert!((var - 0.25).abs() < 1e-12);
    }
    for j in 0..4 {
        assert!((sys.chain_kernel.prob(j, j) - 0.9).abs() < 1e-15);
    }
}

#[test]
fn simulation_is_keyed_by_seed_and_trial() {
    let sys = build_staircase(&small(1, 20)).unwrap();
    let a = simulate_trial(&sys, 1, 0).unwrap();
    assert_eq!(a, simulate_trial(&sys, 1, 0).unwrap());
    assert_ne!(a, simulate_trial(&sys, 1, 1).unwrap());
    assert_ne!(a, simulate_trial(&sys, 2, 0).unwrap());
    assert_eq!(a.z.len(), 21);
    assert!(a.z.iter().all(|&z| z < 4));
    let all = simulate(&sys.with_horizon(20), 1).unwrap();
    assert_eq!(all.z, a.z);
}

#[test]
fn metrics_of_exact_estimates() {
    let x = vec![nalgebra::DVector::from_element(1, 1.0); 3];
    let states = vec![vjgm::gaussian::GaussianDensity::scalar(0.0, 1.0).unwrap(); 3];
    let probs = vec![vjgm::gaussian::Categorical::new(vec![0.75, 0.25]).unwrap(); 3];
    let est = Estimate {
        regime_probs: &probs,
        states: &states,
        reverse_kernels: None,
    };
    let (rmse, acc, lo, chi2) = compute_metrics(&[0, 1, 0], &x, &est, Mode::Filtering).unwrap();
    assert!((rmse - 1.0).abs() < 1e-15);
    assert!((acc - 2.0 / 3.0).abs() < 1e-15);
    let want = (2.0 * 3f64.ln() + (1.0f64 / 3.0).ln()) / 3.0;
    assert!((lo - want).abs() < 1e-12);
    assert!((chi2 - 3.0).abs() < 1e-12);
    assert!(log_odds(1.0).is_finite() && log_odds(0.0).is_finite());
}

#[test]
fn csv_schema_and_row_count() {
    let out = run_experiment(&small(2, 33), 1).unwrap();
    let csv = metrics_csv(&out.rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 4);
    assert!(!csv.contains('\r'));
    let combos: Vec<(&str, &str)> = rows
        .iter()
        .take(4)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 9);
            assert_eq!(f[8], "0");
            (f[1], f[2])
        })
        .collect();
    assert_eq!(
        combos,
        [
            ("imm", "filtering"),
            ("vjgm0", "filtering"),
            ("vjgm0", "smoothing"),
            ("vjgm3", "smoothing")
        ]
    );
    assert_eq!(out.summary.chi2_df, 34);
    assert_eq!(out.summary.methods.len(), 4);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small(6, 20);
    let a = metrics_csv(&run_experiment(&cfg, 1).unwrap().rows);
    let b = metrics_csv(&run_experiment(&cfg, 4).unwrap().rows);
    assert_eq!(a, b);
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(2, 10), 2).unwrap();
    write_outputs(&out, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv, metrics_csv(&out.rows));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["chi2_df"], 11);
    assert_eq!(summary["log_odds"]["base"], "e");
    assert_eq!(summary["log_odds"]["epsilon"], 1e-12);
    assert!(summary["methods"][0]["rmse_x"]["std_err"].is_number());
    assert!(
        summary["elbo_improvement"]["summary"]["mean"]
            .as_f64()
            .unwrap()
            >= -1e-9
    );
}

#[test]
fn mean_and_standard_error() {
    let s = MeanStdErr::of([1.0, 2.0, 3.0, f64::NAN]);
    assert_eq!(s.n, 3);
    assert!((s.mean - 2.0).abs() < 1e-15);
    assert!((s.std_err - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!(MeanStdErr::of([]).mean.is_nan());
}
