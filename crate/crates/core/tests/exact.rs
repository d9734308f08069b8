mod common;

use common::{jump_log_evidence, max_abs, max_abs_v, random_obs, rng, JointOracle};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use vjgm::exact::*;
use vjgm::gaussian::{AffineGaussianKernel, GaussianDensity};
use vjgm::verify::{random_jump_system, random_linear_system};
use vjgm::Error;

fn linear_case(seed: u64, d: usize, t: usize) -> (LinearGaussianSystem, Vec<DVector<f64>>) {
    let mut r = rng(seed);
    let sys = random_linear_system(&mut r, d, t).unwrap();
    let y = random_obs(&mut r, t + 1, sys.obs_dim());
    (sys, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kalman_matches_joint_oracle(seed in any::<u64>(), d in 1usize..=2, t in 0usize..=6) {
        let (sys, y) = linear_case(seed, d, t);
        let kf = kalman_filter(&sys, &y).unwrap();
        let oracle = JointOracle::new(&sys);
        for s in 0..=t {
            let want = oracle.log_evidence(&y, s);
            prop_assert!((kf.log_evidence_at(s) - want).abs() < 1e-9);
            let (m, c) = oracle.marginal(&y, s, s);
            prop_assert!(max_abs_v(kf.filtered[s].mean(), &m) < 1e-9);
            prop_assert!(max_abs(kf.filtered[s].cov(), &c) < 1e-9);
        }
        prop_assert!((kf.log_evidence - oracle.log_evidence(&y, t)).abs() < 1e-9);
    }

    #[test]
    fn rts_and_two_filter_match_oracle(seed in any::<u64>(), d in 1usize..=2, t in 1usize..=6) {
        let (sys, y) = linear_case(seed, d, t);
        let kf = kalman_filter(&sys, &y).unwrap();
        let rts = rts_smoother(&sys, &kf).unwrap();
        let oracle = JointOracle::new(&sys);
        let betas = backward_information_filter(&sys, &y).unwrap();
        let two = two_filter_combine(&kf, &betas).unwrap();
        for s in 0..=t {
            let (m, c) = oracle.marginal(&y, s, t);
            prop_assert!(max_abs_v(rts.marginals[s].mean(), &m) < 1e-9);
            prop_assert!(max_abs(rts.marginals[s].cov(), &c) < 1e-9);
            prop_assert!(max_abs_v(two.marginals[s].mean(), rts.marginals[s].mean()) < 1e-9);
            prop_assert!(max_abs(two.marginals[s].cov(), rts.marginals[s].cov()) < 1e-9);
            prop_assert!((two.log_normalizers[s] - kf.log_evidence).abs() < 1e-9);
        }
    }

    #[test]
    fn rts_reverse_kernels_reproduce_marginals(seed in any::<u64>(), t in 1usize..=5) {
        let (sys, y) = linear_case(seed, 2, t);
        let kf = kalman_filter(&sys, &y).unwrap();
        let rts = rts_smoother(&sys, &kf).unwrap();
        for s in (1..=t).rev() {
            let back = rts.reverse_kernels[s - 1].push(&rts.marginals[s]).unwrap();
            prop_assert!(max_abs_v(back.mean(), rts.marginals[s - 1].mean()) < 1e-9);
            prop_assert!(max_abs(back.cov(), rts.marginals[s - 1].cov()) < 1e-9);
        }
    }

    #[test]
    fn brute_force_single_regime_is_kalman(seed in any::<u64>(), d in 1usize..=2, t in 0usize..=6) {
        let mut r = rng(seed);
        let sys = random_jump_system(&mut r, 1, d, t).unwrap();
        let y = random_obs(&mut r, t + 1, 1);
        let bf = brute_force_jgm(&sys, &y).unwrap();
        let kf = kalman_filter(&sys.along_path(&vec![0; t + 1]).unwrap(), &y).unwrap();
        prop_assert!((bf.log_evidence() - kf.log_evidence).abs() < 1e-10);
        let imm = imm_filter(&sys, &y).unwrap();
        prop_assert!((imm.log_evidence - kf.log_evidence).abs() < 1e-10);
        for s in 0..=t {
            let g = bf.filter_moments(s).unwrap();
            prop_assert!(max_abs_v(g.mean(), kf.filtered[s].mean()) < 1e-10);
            prop_assert!(max_abs(g.cov(), kf.filtered[s].cov()) < 1e-10);
        }
    }

    #[test]
    fn brute_force_matches_path_oracle(seed in any::<u64>(), m in 2usize..=3, t in 0usize..=4) {
        let mut r = rng(seed);
        let sys = random_jump_system(&mut r, m, 1, t).unwrap();
        let y = random_obs(&mut r, t + 1, 1);
        let bf = brute_force_jgm(&sys, &y).unwrap();
        for s in 0..=t {
            prop_assert!((bf.log_evidence_at(s) - jump_log_evidence(&sys, &y, s)).abs() < 1e-9);
            let p = bf.regime_probs(s).unwrap();
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(bf.num_paths(), m.pow(t as u32 + 1));
    }

    #[test]
    fn joint_filter_density_integrates_to_evidence(seed in any::<u64>(), t in 0usize..=4) {
        let mut r = rng(seed);
        let sys = random_jump_system(&mut r, 2, 1, t).unwrap();
        let y = random_obs(&mut r, t + 1, 1);
        let bf = brute_force_jgm(&sys, &y).unwrap();
        // trapezoid rule around the filter moments; a low-weight regime can be much
        // broader than the mixture, so widen until both edges are negligible
        let g = bf.filter_moments(t).unwrap();
        let (mu, sd) = (g.mean()[0], g.cov()[(0, 0)].sqrt());
        let density = |x: f64| -> f64 {
            let x = DVector::from_element(1, x);
            (0..2).map(|z| bf.log_unnormalized_filter(t, &x, z).unwrap().exp()).sum()
        };
        let peak = density(mu);
        let mut half = 12.0 * sd;
        while density(mu - half).max(density(mu + half)) > 1e-14 * peak {
            half *= 2.0;
        }
        let n = 8001;
        let h = 2.0 * half / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            total += w * h * density(mu - half + i as f64 * h);
        }
        prop_assert!((total.ln() - bf.log_evidence()).abs() < 1e-6);
    }
}

#[test]
fn brute_force_smoother_single_regime_is_rts() {
    let mut r = rng(11);
    let sys = random_jump_system(&mut r, 1, 2, 4).unwrap();
    let y = random_obs(&mut r, 5, 1);
    let sm = brute_force_smoother(&sys, &y).unwrap();
    let lin = sys.along_path(&[0; 5]).unwrap();
    let rts = rts_smoother(&lin, &kalman_filter(&lin, &y).unwrap()).unwrap();
    for t in 0..=4 {
        let g = &sm.moments[t];
        assert!(max_abs_v(g.mean(), rts.marginals[t].mean()) < 1e-10);
        assert!(max_abs(g.cov(), rts.marginals[t].cov()) < 1e-10);
    }
}

#[test]
fn imm_probabilities_are_normalized() {
    let mut r = rng(4);
    let sys = random_jump_system(&mut r, 3, 1, 8).unwrap();
    let y = random_obs(&mut r, 9, 1);
    let imm = imm_filter(&sys, &y).unwrap();
    for p in &imm.regime_probs {
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    // IMM merges hypotheses, so its evidence is an approximation; sanity only.
    let bf = brute_force_jgm(&sys, &y).unwrap();
    assert!((imm.log_evidence - bf.log_evidence()).abs() < 2.0);
}

#[test]
fn enumeration_cap_is_enforced() {
    let mut r = rng(1);
    let sys = random_jump_system(&mut r, 2, 1, 10).unwrap();
    let y = random_obs(&mut r, 11, 1);
    match brute_force_jgm_with_cap(&sys, &y, 1000) {
        Err(Error::EnumerationCap { required, cap }) => {
            assert_eq!(required, 2048);
            assert_eq!(cap, 1000);
        }
        other => panic!("expected cap error, got {other:?}"),
    }
}

#[test]
fn zero_process_noise_is_rejected() {
    let k = AffineGaussianKernel::new(
        DMatrix::identity(1, 1),
        DVector::zeros(1),
        DMatrix::zeros(1, 1),
    );
    assert!(matches!(k, Err(Error::NotPositiveDefinite { .. })), "{k:?}");
    // tiny but positive noise is accepted
    assert!(AffineGaussianKernel::scalar(1.0, 0.0, 1e-12).is_ok());
}

#[test]
fn mismatched_observations_are_rejected() {
    let (sys, mut y) = linear_case(2, 1, 3);
    y.pop();
    assert!(matches!(
        kalman_filter(&sys, &y),
        Err(Error::Dimension { .. })
    ));
    let init = GaussianDensity::scalar(0.0, 1.0).unwrap();
    let bad = LinearGaussianSystem::new(init, vec![], vec![]);
    assert!(bad.is_err());
}
