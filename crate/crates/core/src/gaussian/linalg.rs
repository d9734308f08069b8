//! Small dense linear-algebra helpers shared by the Gaussian types.
//!
//! Every solve goes through a Cholesky factorization. A failed factorization is
//! reported as [`Error::NotPositiveDefinite`]; nothing is regularized unless the
//! process-wide jitter has been set to a positive value.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub(crate) const LOG_2PI: f64 = 1.837_877_066_409_345_3;

/// Relative tolerance for the symmetry check on user-supplied matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

static JITTER_BITS: AtomicU64 = AtomicU64::new(0);

/// Sets the diagonal jitter added before every Cholesky factorization.
///
/// The default is `0.0`. Only the experiment harness should touch this.
pub fn set_jitter(jitter: f64) {
    let j = if jitter.is_finite() && jitter > 0.0 {
        jitter
    } else {
        0.0
    };
    JITTER_BITS.store(j.to_bits(), Ordering::Relaxed);
}

pub fn jitter() -> f64 {
    f64::from_bits(JITTER_BITS.load(Ordering::Relaxed))
}

pub(crate) type Chol = Cholesky<f64, Dyn>;

pub(crate) fn cholesky(m: &DMatrix<f64>, name: &str) -> Result<Chol> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::not_pd(name));
    }
    let j = jitter();
    let factor = if j > 0.0 {
        let mut m = m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += j;
        }
        Cholesky::new(m)
    } else {
        Cholesky::new(m.clone())
    };
    factor.ok_or_else(|| Error::not_pd(name))
}

pub(crate) fn log_det(chol: &Chol) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Checks squareness, finiteness and symmetry (relative to the largest entry).
pub(crate) fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(
            "matrix",
            format!("`{name}` is {}x{}, expected square", m.nrows(), m.ncols()),
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "matrix",
            format!("`{name}` has non-finite entries"),
        ));
    }
    let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric {
            matrix: name.to_string(),
            asymmetry: asym,
        });
    }
    Ok(())
}

pub(crate) fn spd_inverse(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    Ok(symmetrize(&cholesky(m, name)?.inverse()))
}

pub(crate) fn quad_form(chol: &Chol, v: &DVector<f64>) -> f64 {
    let z = chol
        .l_dirty()
        .solve_lower_triangular(v)
        .unwrap_or_else(|| v.clone());
    z.dot(&z)
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    // fixed summation order
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

/// Splits a stacked vector `(u, v)` with `u` of length `du`.
pub(crate) fn split_vec(v: &DVector<f64>, du: usize) -> (DVector<f64>, DVector<f64>) {
    let n = v.len();
    (v.rows(0, du).into_owned(), v.rows(du, n - du).into_owned())
}

/// Blocks `(uu, uv, vu, vv)` of a square matrix partitioned after `du` rows.
pub(crate) fn split_mat(
    m: &DMatrix<f64>,
    du: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let dv = n - du;
    (
        m.view((0, 0), (du, du)).into_owned(),
        m.view((0, du), (du, dv)).into_owned(),
        m.view((du, 0), (dv, du)).into_owned(),
        m.view((du, du), (dv, dv)).into_owned(),
    )
}

pub(crate) fn stack_vec(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len() + v.len());
    out.rows_mut(0, u.len()).copy_from(u);
    out.rows_mut(u.len(), v.len()).copy_from(v);
    out
}

pub(crate) fn block_mat(
    uu: &DMatrix<f64>,
    uv: &DMatrix<f64>,
    vu: &DMatrix<f64>,
    vv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let du = uu.nrows();
    let dv = vv.nrows();
    let mut out = DMatrix::zeros(du + dv, du + dv);
    out.view_mut((0, 0), (du, du)).copy_from(uu);
    out.view_mut((0, du), (du, dv)).copy_from(uv);
    out.view_mut((du, 0), (dv, du)).copy_from(vu);
    out.view_mut((du, du), (dv, dv)).copy_from(vv);
    out
}
