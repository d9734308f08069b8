//! Dense joint-Gaussian oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vjgm::exact::{JumpGMSystem, LinearGaussianSystem};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn log_normal(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().expect("oracle covariance is SPD");
    let r = y - mean;
    let maha = r.dot(&chol.solve(&r));
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (maha + log_det + y.len() as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Moments of the stacked state path and observations of a linear system.
pub struct JointOracle {
    pub d: usize,
    pub p: usize,
    pub mx: DVector<f64>,
    pub sxx: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub r: DMatrix<f64>,
}

impl JointOracle {
    pub fn new(sys: &LinearGaussianSystem) -> Self {
        let n = sys.horizon() + 1;
        let d = sys.state_dim();
        let p = sys.obs_dim();
        let mut mx = DVector::zeros(n * d);
        let mut sxx = DMatrix::zeros(n * d, n * d);
        mx.rows_mut(0, d).copy_from(sys.init.mean());
        sxx.view_mut((0, 0), (d, d)).copy_from(sys.init.cov());
        for t in 1..n {
            let k = &sys.transitions[t - 1];
            let a = k.slope();
            let m = a * mx.rows((t - 1) * d, d) + k.offset();
            mx.rows_mut(t * d, d).copy_from(&m);
            for s in 0..t {
                let c = a * sxx.view(((t - 1) * d, s * d), (d, d));
                sxx.view_mut((t * d, s * d), (d, d)).copy_from(&c);
                sxx.view_mut((s * d, t * d), (d, d))
                    .copy_from(&c.transpose());
            }
            let c = a * sxx.view(((t - 1) * d, (t - 1) * d), (d, d)) * a.transpose() + k.cov();
            sxx.view_mut((t * d, t * d), (d, d)).copy_from(&c);
        }
        let mut h = DMatrix::zeros(n * p, n * d);
        let mut c = DVector::zeros(n * p);
        let mut r = DMatrix::zeros(n * p, n * p);
        for t in 0..n {
            let o = &sys.observations[t];
            h.view_mut((t * p, t * d), (p, d)).copy_from(o.slope());
            c.rows_mut(t * p, p).copy_from(o.offset());
            r.view_mut((t * p, t * p), (p, p)).copy_from(o.cov());
        }
        Self {
            d,
            p,
            mx,
            sxx,
            h,
            c,
            r,
        }
    }

    fn stack(y: &[DVector<f64>]) -> DVector<f64> {
        let parts: Vec<f64> = y.iter().flat_map(|v| v.iter().copied()).collect();
        DVector::from_vec(parts)
    }

    /// `log p(y_{0:t})`.
    pub fn log_evidence(&self, y: &[DVector<f64>], t: usize) -> f64 {
        let k = (t + 1) * self.p;
        let my = &self.h * &self.mx + &self.c;
        let syy = &self.h * &self.sxx * self.h.transpose() + &self.r;
        let yv = Self::stack(&y[..=t]);
        log_normal(
            &yv,
            &my.rows(0, k).into_owned(),
            &syy.view((0, 0), (k, k)).into_owned(),
        )
    }

    /// Mean and covariance of `x_s | y_{0:t}`.
    pub fn marginal(&self, y: &[DVector<f64>], s: usize, t: usize) -> (DVector<f64>, DMatrix<f64>) {
        let k = (t + 1) * self.p;
        let d = self.d;
        let h = self.h.rows(0, k).into_owned();
        let my = &h * &self.mx + self.c.rows(0, k);
        let syy = &h * &self.sxx * h.transpose() + self.r.view((0, 0), (k, k));
        let sxy = &self.sxx * h.transpose();
        let chol = syy.cholesky().unwrap();
        let innov = Self::stack(&y[..=t]) - my;
        let mean = &self.mx + &sxy * chol.solve(&innov);
        let cov = &self.sxx - &sxy * chol.solve(&sxy.transpose());
        (
            mean.rows(s * d, d).into_owned(),
            cov.view((s * d, s * d), (d, d)).into_owned(),
        )
    }
}

/// `log p(y_{0:t})` of a jump system by explicit path enumeration over dense oracles.
pub fn jump_log_evidence(sys: &JumpGMSystem, y: &[DVector<f64>], t: usize) -> f64 {
    let m = sys.num_regimes();
    let sys_t = sys.with_horizon(t);
    let mut terms = Vec::new();
    let mut path = vec![0usize; t + 1];
    loop {
        let mut lp = sys.chain_init.probs()[path[0]].ln();
        for s in 1..=t {
            lp += sys.chain_kernel.prob(path[s], path[s - 1]).ln();
        }
        if lp.is_finite() {
            let lin = sys_t.along_path(&path).unwrap();
            terms.push(lp + JointOracle::new(&lin).log_evidence(y, t));
        }
        let mut i = 0;
        while i <= t {
            path[i] += 1;
            if path[i] < m {
                break;
            }
            path[i] = 0;
            i += 1;
        }
        if i > t {
            break;
        }
    }
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + terms.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn max_abs_v(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// Arbitrary observations; the exact identities hold for any data.
pub fn random_obs(rng: &mut ChaCha20Rng, n: usize, p: usize) -> Vec<DVector<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| {
            DVector::from_fn(p, |_, _| {
                let e: f64 = StandardNormal.sample(rng);
                1.5 * e
            })
        })
        .collect()
}
