mod common;

use common::{max_abs, max_abs_v, random_obs, rng, JointOracle};
use nalgebra::DVector;
use proptest::prelude::*;
use vjgm::exact::{kalman_filter, rts_smoother, LinearGaussianSystem};
use vjgm::gaussian::GaussianDensity;
use vjgm::linear::*;
use vjgm::verify::random_linear_system;

fn case(seed: u64, d: usize, t: usize) -> (LinearGaussianSystem, Vec<DVector<f64>>) {
    let mut r = rng(seed);
    let sys = random_linear_system(&mut r, d, t).unwrap();
    let y = random_obs(&mut r, t + 1, sys.obs_dim());
    (sys, y)
}

fn rts_posterior(sys: &LinearGaussianSystem, y: &[DVector<f64>]) -> GaussMarkovPosterior {
    let kf = kalman_filter(sys, y).unwrap();
    let rts = rts_smoother(sys, &kf).unwrap();
    GaussMarkovPosterior::from_reverse(rts.marginals[sys.horizon()].clone(), rts.reverse_kernels)
        .unwrap()
}

fn standard_marginals(sys: &LinearGaussianSystem) -> Vec<GaussianDensity> {
    vec![GaussianDensity::standard(sys.state_dim()); sys.horizon() + 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_sweep_is_the_kalman_filter(seed in any::<u64>(), d in 1usize..=2, t in 0usize..=6) {
        let (sys, y) = case(seed, d, t);
        let kf = kalman_filter(&sys, &y).unwrap();
        let sweep = forward_representer_sweep(&sys, &y, &standard_marginals(&sys)).unwrap();
        let oracle = JointOracle::new(&sys);
        for s in 0..=t {
            let (log_z, g) = sweep.rho[s].normalize().unwrap();
            prop_assert!((log_z - oracle.log_evidence(&y, s)).abs() < 1e-8);
            prop_assert!(max_abs_v(g.mean(), kf.filtered[s].mean()) < 1e-8);
            prop_assert!(max_abs(g.cov(), kf.filtered[s].cov()) < 1e-8);
            let (log_zp, gp) = sweep.rho_pred[s].normalize().unwrap();
            let prev = if s == 0 { 0.0 } else { oracle.log_evidence(&y, s - 1) };
            prop_assert!((log_zp - prev).abs() < 1e-8);
            prop_assert!(max_abs_v(gp.mean(), kf.predicted[s].mean()) < 1e-8);
        }
    }

    #[test]
    fn backward_sweep_is_the_exact_likelihood(seed in any::<u64>(), d in 1usize..=2, t in 1usize..=6) {
        let (sys, y) = case(seed, d, t);
        let marg = standard_marginals(&sys);
        let fwd = forward_representer_sweep(&sys, &y, &marg).unwrap();
        let bwd = backward_representer_sweep(&sys, &y, &marg).unwrap();
        let oracle = JointOracle::new(&sys);
        let log_h = oracle.log_evidence(&y, t);
        for s in 0..=t {
            // rho_t beta_t integrates to the evidence and normalizes to the smoothing marginal
            let (log_z, g) = fwd.rho[s].add(&bwd.beta[s]).unwrap().normalize().unwrap();
            prop_assert!((log_z - log_h).abs() < 1e-8);
            let (m, c) = oracle.marginal(&y, s, t);
            prop_assert!(max_abs_v(g.mean(), &m) < 1e-8);
            prop_assert!(max_abs(g.cov(), &c) < 1e-8);
            let two = variational_two_filter(&fwd, &bwd, s).unwrap();
            prop_assert!(max_abs_v(two.mean(), &m) < 1e-8);
        }
        let (log_z0, q0) = backward_initial_density(&sys, &y, &bwd.beta[0]).unwrap();
        prop_assert!((log_z0 - log_h).abs() < 1e-8);
        let (m0, _) = oracle.marginal(&y, 0, t);
        prop_assert!(max_abs_v(q0.mean(), &m0) < 1e-8);
    }

    #[test]
    fn fixed_point_smoother_is_rts(seed in any::<u64>(), d in 1usize..=2, t in 1usize..=6, iters in 1usize..=3) {
        let (sys, y) = case(seed, d, t);
        let (post, trace) = fixed_point_smoother(&sys, &y, &standard_marginals(&sys), iters).unwrap();
        let exact = rts_posterior(&sys, &y);
        for s in 0..=t {
            prop_assert!(max_abs_v(post.marginals[s].mean(), exact.marginals[s].mean()) < 1e-8);
            prop_assert!(max_abs(post.marginals[s].cov(), exact.marginals[s].cov()) < 1e-8);
        }
        let log_h = kalman_filter(&sys, &y).unwrap().log_evidence;
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        prop_assert!((trace.last().unwrap() - log_h).abs() < 1e-8);
        prop_assert!(post.consistency_error().unwrap() < 1e-8);
    }

    #[test]
    fn elbo_of_exact_posterior_is_the_evidence(seed in any::<u64>(), d in 1usize..=2, t in 0usize..=6) {
        let (sys, y) = case(seed, d, t);
        let post = rts_posterior(&sys, &y);
        let log_h = kalman_filter(&sys, &y).unwrap().log_evidence;
        prop_assert!((elbo(&sys, &y, &post).unwrap() - log_h).abs() < 1e-8);
    }

    #[test]
    fn shifted_posteriors_have_jensen_slack(seed in any::<u64>(), d in 1usize..=2, t in 1usize..=6) {
        let (sys, y) = case(seed, d, t);
        let post = rts_posterior(&sys, &y).shifted(0.5).unwrap();
        prop_assert!(post.consistency_error().unwrap() < 1e-8);
        let log_h = kalman_filter(&sys, &y).unwrap().log_evidence;
        let value = elbo(&sys, &y, &post).unwrap();
        prop_assert!(value < log_h - 1e-6);

        // every representer under fixed kernels is a pointwise lower bound
        let oracle = JointOracle::new(&sys);
        let fwd = forward_representer_sweep_with_kernels(&sys, &y, &post.marginals, &post.reverse_kernels).unwrap();
        let exact = forward_representer_sweep(&sys, &y, &post.marginals).unwrap();
        let mut r = rng(seed ^ 0x5eed);
        for s in 0..=t {
            for x in random_obs(&mut r, 5, d) {
                prop_assert!(fwd.rho[s].eval(&x).unwrap() <= exact.rho[s].eval(&x).unwrap() + 1e-9);
            }
            let (log_z, _) = fwd.rho[s].normalize().unwrap();
            prop_assert!(log_z <= oracle.log_evidence(&y, s) + 1e-9);
        }
        let bwd = backward_representer_sweep_with_kernels(&sys, &y, &post.marginals, &post.forward_kernels).unwrap();
        let bwd_exact = backward_representer_sweep(&sys, &y, &post.marginals).unwrap();
        for s in 0..=t {
            for x in random_obs(&mut r, 5, d) {
                prop_assert!(bwd.beta[s].eval(&x).unwrap() <= bwd_exact.beta[s].eval(&x).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn courts_collapse_is_the_kalman_filter(seed in any::<u64>(), d in 1usize..=2, t in 0usize..=6) {
        let (sys, y) = case(seed, d, t);
        let kf = kalman_filter(&sys, &y).unwrap();
        let out = courts_filter(&sys, &y).unwrap();
        for (s, (log_kappa, q)) in out.iter().enumerate() {
            prop_assert!((log_kappa - kf.log_evidence_at(s)).abs() < 1e-8);
            prop_assert!(max_abs_v(q.mean(), kf.filtered[s].mean()) < 1e-8);
            prop_assert!(max_abs(q.cov(), kf.filtered[s].cov()) < 1e-8);
        }
    }
}

#[test]
fn zero_iterations_are_rejected() {
    let (sys, y) = case(1, 1, 3);
    assert!(fixed_point_smoother(&sys, &y, &standard_marginals(&sys), 0).is_err());
}

#[test]
fn wrong_marginal_count_is_rejected() {
    let (sys, y) = case(2, 1, 3);
    let short = vec![GaussianDensity::standard(1); 2];
    assert!(forward_representer_sweep(&sys, &y, &short).is_err());
}
