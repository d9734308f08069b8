//! C ABI over the `vjgm` crate.
//!
//! Every fallible function returns a [`VjgmStatus`]. On failure the message is
//! kept per thread and can be read with [`vjgm_last_error`]. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DVector;
use vjgm::exact::JumpGMSystem;
use vjgm::experiments::{build_staircase, simulate_trial, StaircaseConfig};
use vjgm::vjgm::{
    fixed_point_smoother, posterior_from_filter, posterior_to_json, suboptimal_filter,
    VjgmPosterior as Posterior,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VjgmStatus {
    Ok = 0,
    Null = 1,
    InvalidArgument = 2,
    Numeric = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// A jump Gauss-Markov system.
pub struct VjgmSystem {
    inner: JumpGMSystem,
}

/// A variational posterior produced by [`vjgm_filter`] or [`vjgm_smooth`].
pub struct VjgmPosterior {
    inner: Posterior,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &vjgm::Error) -> VjgmStatus {
    use vjgm::Error::*;
    match e {
        AtTime { source, .. } => status_of(source),
        NotPositiveDefinite { .. } | NotSymmetric { .. } | ImproperProduct | DegenerateWeights => {
            VjgmStatus::Numeric
        }
        _ => VjgmStatus::InvalidArgument,
    }
}

fn fail(status: VjgmStatus, msg: impl Into<String>) -> VjgmStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), VjgmStatus>) -> VjgmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VjgmStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(VjgmStatus::Panic, msg)
        }
    }
}

fn lib<T>(r: vjgm::Result<T>) -> Result<T, VjgmStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, VjgmStatus> {
    p.as_ref()
        .ok_or_else(|| fail(VjgmStatus::Null, format!("{what} is null")))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), VjgmStatus> {
    if p.is_null() {
        return Err(fail(VjgmStatus::Null, format!("{what} is null")));
    }
    Ok(())
}

fn check_cap(cap: usize, needed: usize, what: &str) -> Result<(), VjgmStatus> {
    if cap < needed {
        return Err(fail(
            VjgmStatus::BufferTooSmall,
            format!("{what} needs {needed} entries, got {cap}"),
        ));
    }
    Ok(())
}

/// Creates the staircase model with `m` regimes and horizon `horizon`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn vjgm_staircase_new(
    m: usize,
    p: f64,
    phi0: f64,
    sigma0: f64,
    r: f64,
    horizon: usize,
    out: *mut *mut VjgmSystem,
) -> VjgmStatus {
    guard(|| {
        check_out(out, "out")?;
        let cfg = StaircaseConfig {
            m,
            p,
            phi0,
            sigma0,
            r,
            t: horizon,
            ..StaircaseConfig::default()
        };
        let inner = lib(build_staircase(&cfg))?;
        *out = Box::into_raw(Box::new(VjgmSystem { inner }));
        Ok(())
    })
}

/// # Safety
/// `sys` must be null or a handle from [`vjgm_staircase_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vjgm_system_free(sys: *mut VjgmSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of time points `T + 1`.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vjgm_system_len(sys: *const VjgmSystem, out: *mut usize) -> VjgmStatus {
    guard(|| {
        let sys = non_null(sys, "sys")?;
        check_out(out, "out")?;
        *out = sys.inner.horizon + 1;
        Ok(())
    })
}

/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vjgm_system_num_regimes(
    sys: *const VjgmSystem,
    out: *mut usize,
) -> VjgmStatus {
    guard(|| {
        let sys = non_null(sys, "sys")?;
        check_out(out, "out")?;
        *out = sys.inner.num_regimes();
        Ok(())
    })
}

/// Samples trial `trial` of seed `seed`.
///
/// `z` receives `T + 1` regimes, `x` and `y` receive `T + 1` points each,
/// stored contiguously with the state and observation dimension per point.
/// `len` is the number of time points the buffers can hold.
///
/// # Safety
/// `sys` must be a live handle; the buffers must be writable for the sizes above.
#[no_mangle]
pub unsafe extern "C" fn vjgm_simulate(
    sys: *const VjgmSystem,
    seed: u64,
    trial: u64,
    z: *mut usize,
    x: *mut f64,
    y: *mut f64,
    len: usize,
) -> VjgmStatus {
    guard(|| {
        let sys = non_null(sys, "sys")?;
        check_out(z, "z")?;
        check_out(x, "x")?;
        check_out(y, "y")?;
        check_cap(len, sys.inner.horizon + 1, "len")?;
        let paths = lib(simulate_trial(&sys.inner, seed, trial))?;
        let (dx, dy) = (sys.inner.state_dim(), sys.inner.obs_dim());
        for t in 0..paths.z.len() {
            *z.add(t) = paths.z[t];
            ptr::copy_nonoverlapping(paths.x[t].as_ptr(), x.add(t * dx), dx);
            ptr::copy_nonoverlapping(paths.y[t].as_ptr(), y.add(t * dy), dy);
        }
        Ok(())
    })
}

unsafe fn read_observations(
    sys: &JumpGMSystem,
    y: *const f64,
    len: usize,
) -> Result<(JumpGMSystem, Vec<DVector<f64>>), VjgmStatus> {
    if y.is_null() {
        return Err(fail(VjgmStatus::Null, "y is null"));
    }
    if len == 0 {
        return Err(fail(VjgmStatus::InvalidArgument, "len must be at least 1"));
    }
    let d = sys.obs_dim();
    let data = std::slice::from_raw_parts(y, len * d);
    let obs = data.chunks(d).map(DVector::from_column_slice).collect();
    Ok((sys.with_horizon(len - 1), obs))
}

unsafe fn run_posterior(
    sys: *const VjgmSystem,
    y: *const f64,
    len: usize,
    iters: Option<usize>,
    out: *mut *mut VjgmPosterior,
) -> VjgmStatus {
    guard(|| {
        let sys = non_null(sys, "sys")?;
        check_out(out, "out")?;
        let (sys, y) = read_observations(&sys.inner, y, len)?;
        let filt = lib(suboptimal_filter(&sys, &y))?;
        let inner = match iters {
            None => lib(posterior_from_filter(&filt))?,
            Some(k) => lib(fixed_point_smoother(&sys, &y, &filt, k))?,
        };
        *out = Box::into_raw(Box::new(VjgmPosterior { inner }));
        Ok(())
    })
}

/// Runs VJGM(0) on `len` observations. The system's horizon is replaced by `len - 1`.
///
/// The result holds the filter's terminal marginal propagated backward through
/// its reverse kernels.
///
/// # Safety
/// `sys` must be a live handle, `y` readable for `len` points and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vjgm_filter(
    sys: *const VjgmSystem,
    y: *const f64,
    len: usize,
    out: *mut *mut VjgmPosterior,
) -> VjgmStatus {
    run_posterior(sys, y, len, None, out)
}

/// Runs VJGM(`iters`).
///
/// # Safety
/// As for [`vjgm_filter`].
#[no_mangle]
pub unsafe extern "C" fn vjgm_smooth(
    sys: *const VjgmSystem,
    y: *const f64,
    len: usize,
    iters: usize,
    out: *mut *mut VjgmPosterior,
) -> VjgmStatus {
    run_posterior(sys, y, len, Some(iters), out)
}

/// # Safety
/// `post` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vjgm_posterior_free(post: *mut VjgmPosterior) {
    if !post.is_null() {
        drop(Box::from_raw(post));
    }
}

/// # Safety
/// `post` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vjgm_posterior_elbo(
    post: *const VjgmPosterior,
    out: *mut f64,
) -> VjgmStatus {
    guard(|| {
        let post = non_null(post, "post")?;
        check_out(out, "out")?;
        *out = post.inner.elbo;
        Ok(())
    })
}

/// Number of time points.
///
/// # Safety
/// `post` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vjgm_posterior_len(
    post: *const VjgmPosterior,
    out: *mut usize,
) -> VjgmStatus {
    guard(|| {
        let post = non_null(post, "post")?;
        check_out(out, "out")?;
        *out = post.inner.marginals.len();
        Ok(())
    })
}

unsafe fn copy_at(
    post: *const VjgmPosterior,
    t: usize,
    buf: *mut f64,
    cap: usize,
    get: impl Fn(&Posterior, usize) -> Vec<f64>,
) -> VjgmStatus {
    guard(|| {
        let post = non_null(post, "post")?;
        check_out(buf, "buf")?;
        let n = post.inner.marginals.len();
        if t >= n {
            return Err(fail(
                VjgmStatus::InvalidArgument,
                format!("t = {t} is outside 0..{n}"),
            ));
        }
        let v = get(&post.inner, t);
        check_cap(cap, v.len(), "buf")?;
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// Writes the regime probabilities `f_t` into `buf`.
///
/// # Safety
/// `post` must be a live handle and `buf` writable for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn vjgm_posterior_regime_probs(
    post: *const VjgmPosterior,
    t: usize,
    buf: *mut f64,
    cap: usize,
) -> VjgmStatus {
    copy_at(post, t, buf, cap, |p, t| p.marginals[t].f.probs().to_vec())
}

/// Writes the state mean of `g_t` into `buf`.
///
/// # Safety
/// `post` must be a live handle and `buf` writable for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn vjgm_posterior_state_mean(
    post: *const VjgmPosterior,
    t: usize,
    buf: *mut f64,
    cap: usize,
) -> VjgmStatus {
    copy_at(post, t, buf, cap, |p, t| {
        p.marginals[t].g.mean().iter().copied().collect()
    })
}

unsafe fn write_c_string(
    s: &str,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> Result<(), VjgmStatus> {
    let n = s.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() && cap == 0 {
        return Ok(());
    }
    check_out(buf, "buf")?;
    check_cap(cap, n, "buf")?;
    ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Writes the posterior as a NUL-terminated JSON document.
///
/// `needed` (if non-null) receives the size including the terminator. Passing
/// a null `buf` with `cap == 0` only queries the size.
///
/// # Safety
/// `post` must be a live handle and `buf` writable for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn vjgm_posterior_json(
    post: *const VjgmPosterior,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> VjgmStatus {
    guard(|| {
        let post = non_null(post, "post")?;
        let json = serde_json::to_string(&posterior_to_json(&post.inner))
            .map_err(|e| fail(VjgmStatus::InvalidArgument, e.to_string()))?;
        write_c_string(&json, buf, cap, needed)
    })
}

/// Copies the last error message of this thread into `buf`, NUL-terminated
/// and truncated to fit. Returns the full size including the terminator.
///
/// # Safety
/// `buf` must be null or writable for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn vjgm_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = e.len().min(cap - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len() + 1
    })
}
