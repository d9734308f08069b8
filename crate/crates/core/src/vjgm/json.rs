use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::smoother::VjgmPosterior;

/// A Gaussian as plain arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianJson {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// Serialized posterior. Matrices are row-major nested arrays; `rev_f[t][i][j]`
/// is the probability of regime `i` at `t` given regime `j` at `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorJson {
    pub f: Vec<Vec<f64>>,
    pub g_mean: Vec<Vec<f64>>,
    pub g_cov: Vec<Vec<Vec<f64>>>,
    pub f_star: Vec<Vec<f64>>,
    pub g_star: Vec<Vec<GaussianJson>>,
    pub rev_f: Vec<Vec<Vec<f64>>>,
    pub rev_a_slope: Vec<Vec<Vec<f64>>>,
    pub rev_a_offset: Vec<Vec<f64>>,
    pub rev_q: Vec<Vec<Vec<f64>>>,
    pub elbo_trace: Vec<f64>,
    pub log_kappa: Vec<f64>,
    pub elbo: f64,
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn posterior_to_json(post: &VjgmPosterior) -> PosteriorJson {
    PosteriorJson {
        f: post
            .marginals
            .iter()
            .map(|q| q.f.probs().to_vec())
            .collect(),
        g_mean: post.marginals.iter().map(|q| vec_of(q.g.mean())).collect(),
        g_cov: post.marginals.iter().map(|q| rows_of(q.g.cov())).collect(),
        f_star: post
            .representers
            .iter()
            .map(|r| r.f_star.probs().to_vec())
            .collect(),
        g_star: post
            .representers
            .iter()
            .map(|r| {
                r.g_star
                    .iter()
                    .map(|g| GaussianJson {
                        mean: vec_of(g.mean()),
                        cov: rows_of(g.cov()),
                    })
                    .collect()
            })
            .collect(),
        rev_f: post
            .reverse
            .iter()
            .map(|k| rows_of(k.f_rev.matrix()))
            .collect(),
        rev_a_slope: post
            .reverse
            .iter()
            .map(|k| rows_of(k.g_rev.slope()))
            .collect(),
        rev_a_offset: post
            .reverse
            .iter()
            .map(|k| vec_of(k.g_rev.offset()))
            .collect(),
        rev_q: post
            .reverse
            .iter()
            .map(|k| rows_of(k.g_rev.cov()))
            .collect(),
        elbo_trace: post.elbo_trace.clone(),
        log_kappa: post.representers.iter().map(|r| r.log_kappa).collect(),
        elbo: post.elbo,
    }
}
