use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::linalg::log_sum_exp;
use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Probability vector over `{0, …, M-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("categorical", "empty probability vector"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid(
                "categorical",
                "entries must be finite and >= 0",
            ));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > SUM_TOL * probs.len().max(1) as f64 {
            return Err(Error::invalid("categorical", format!("entries sum to {s}")));
        }
        let probs = probs.into_iter().map(|p| p / s).collect();
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn one_hot(m: usize, k: usize) -> Self {
        let mut probs = vec![0.0; m];
        probs[k] = 1.0;
        Self { probs }
    }

    /// Normalizes log-weights with log-sum-exp. `-inf` entries get probability 0.
    pub fn from_log_weights(log_w: &[f64]) -> Result<(f64, Self)> {
        if log_w.is_empty() {
            return Err(Error::invalid("categorical", "empty weight vector"));
        }
        if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::invalid("categorical", "NaN or +inf log-weight"));
        }
        let lse = log_sum_exp(log_w);
        if lse == f64::NEG_INFINITY {
            return Err(Error::DegenerateWeights);
        }
        let mut probs: Vec<f64> = log_w.iter().map(|l| (l - lse).exp()).collect();
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        Ok((lse, Self { probs }))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.ln()).collect()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// `Σ p log(p / q)` with `0 log 0 = 0`; `+inf` when `p` leaves the support of `q`.
    pub fn kl_divergence(&self, other: &Categorical) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(&p, &q)| {
                if p == 0.0 {
                    0.0
                } else if q == 0.0 {
                    f64::INFINITY
                } else {
                    p * (p / q).ln()
                }
            })
            .sum()
    }
}

/// Column-stochastic matrix: entry `(i, j)` is the probability of `i` given `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalKernel {
    matrix: DMatrix<f64>,
}

impl CategoricalKernel {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::invalid(
                "categorical kernel",
                "must be square and non-empty",
            ));
        }
        let mut matrix = matrix;
        for j in 0..matrix.ncols() {
            let col: Vec<f64> = matrix.column(j).iter().cloned().collect();
            let c = Categorical::new(col)
                .map_err(|e| Error::invalid("categorical kernel", format!("column {j}: {e}")))?;
            matrix.column_mut(j).copy_from_slice(c.probs());
        }
        Ok(Self { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(m, m),
        }
    }

    /// Builds a kernel from per-column log-weights; an all-`-inf` column
    /// becomes uniform.
    pub fn from_log_columns(log_cols: &[Vec<f64>]) -> Result<Self> {
        let m = log_cols.len();
        let mut matrix = DMatrix::zeros(m, m);
        for (j, col) in log_cols.iter().enumerate() {
            let c = match Categorical::from_log_weights(col) {
                Ok((_, c)) => c,
                Err(Error::DegenerateWeights) => Categorical::uniform(m),
                Err(e) => return Err(e),
            };
            matrix.column_mut(j).copy_from_slice(c.probs());
        }
        Ok(Self { matrix })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn prob(&self, dest: usize, src: usize) -> f64 {
        self.matrix[(dest, src)]
    }

    pub fn column(&self, src: usize) -> Categorical {
        Categorical {
            probs: self.matrix.column(src).iter().cloned().collect(),
        }
    }

    /// `Σ_j K(i, j) p(j)`.
    pub fn propagate(&self, p: &Categorical) -> Result<Categorical> {
        if p.len() != self.size() {
            return Err(Error::Dimension {
                context: "CategoricalKernel::propagate",
                expected: self.size(),
                got: p.len(),
            });
        }
        let mut out = vec![0.0; self.size()];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, pj) in p.probs().iter().enumerate() {
                *o += self.matrix[(i, j)] * pj;
            }
        }
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= s);
        Ok(Categorical { probs: out })
    }
}
