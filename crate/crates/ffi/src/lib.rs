//! C interface to `driftid`: simulate particle paths, estimate the potential
//! and measure its error.
//!
//! Every fallible function returns a [`DriftidStatus`]; on failure the message
//! is available from [`driftid_last_error`] on the same thread. Handles are
//! opaque and released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use driftid::experiment::fit_rate;
use driftid::likelihood::TikhonovConfig;
use driftid::map_estimator::{infer_map, l2_error, ModelSpec, OptimizerConfig};
use driftid::potential::{DriftSpec, FourierPotential, SobolevOrder};
use driftid::sde::{
    simulate_trajectories, BoundaryMode, Domain, InitialLaw, TimeSchedule, TrajectorySet,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftidStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad arguments or configuration.
    InvalidArgument = 2,
    /// The computation itself broke down.
    Numerical = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

/// Fourier potential `Φ` on a period of length `L`.
pub struct DriftidPotential(FourierPotential);

/// Simulated particle paths with their schedule and domain.
pub struct DriftidTrajectories(TrajectorySet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (DriftidStatus, String);

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn from_lib(e: driftid::Error) -> Failure {
    let status = if e.is_config() {
        DriftidStatus::InvalidArgument
    } else {
        DriftidStatus::Numerical
    };
    (status, e.to_string())
}

fn invalid(msg: &str) -> Failure {
    (DriftidStatus::InvalidArgument, msg.to_owned())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DriftidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DriftidStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            DriftidStatus::Panic
        }
    }
}

unsafe fn nonnull<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| (DriftidStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err((DriftidStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err((DriftidStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn driftid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates `Φ(x) = Σ a_k cos(2πkx/L) + b_k sin(2πkx/L)` from `num_modes`
/// cosine and sine coefficients.
///
/// # Safety
/// `cos` and `sin` must point to `num_modes` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn driftid_potential_new(
    cos: *const f64,
    sin: *const f64,
    num_modes: usize,
    length: f64,
    out: *mut *mut DriftidPotential,
) -> DriftidStatus {
    guard(|| {
        let cos = slice(cos, num_modes, "cos")?.to_vec();
        let sin = slice(sin, num_modes, "sin")?.to_vec();
        let p = FourierPotential::new(cos, sin, length).map_err(from_lib)?;
        write(out, Box::into_raw(Box::new(DriftidPotential(p))), "out")
    })
}

/// The default two-well potential padded to `num_modes` modes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn driftid_potential_two_well(
    num_modes: usize,
    length: f64,
    out: *mut *mut DriftidPotential,
) -> DriftidStatus {
    guard(|| {
        let p = FourierPotential::two_well(num_modes, length).map_err(from_lib)?;
        write(out, Box::into_raw(Box::new(DriftidPotential(p))), "out")
    })
}

/// Number of Fourier modes `K`, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn driftid_potential_num_modes(p: *const DriftidPotential) -> usize {
    p.as_ref().map_or(0, |p| p.0.num_modes())
}

/// Copies the coefficients into `cos_out` and `sin_out`, each of length `capacity >= K`.
///
/// # Safety
/// `p` must be a live handle and both buffers must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn driftid_potential_coefficients(
    p: *const DriftidPotential,
    cos_out: *mut f64,
    sin_out: *mut f64,
    capacity: usize,
) -> DriftidStatus {
    guard(|| {
        let p = &nonnull(p, "potential")?.0;
        let k = p.num_modes();
        if capacity < k {
            return Err(invalid("buffers are shorter than the number of modes"));
        }
        if cos_out.is_null() || sin_out.is_null() {
            return Err((
                DriftidStatus::NullPointer,
                "coefficient buffer is null".into(),
            ));
        }
        ptr::copy_nonoverlapping(p.cos_coeffs().as_ptr(), cos_out, k);
        ptr::copy_nonoverlapping(p.sin_coeffs().as_ptr(), sin_out, k);
        Ok(())
    })
}

/// Writes `Φ(x)` to `out`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn driftid_potential_eval(
    p: *const DriftidPotential,
    x: f64,
    out: *mut f64,
) -> DriftidStatus {
    guard(|| {
        let v = nonnull(p, "potential")?.0.eval(x);
        write(out, v, "out")
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn driftid_potential_free(p: *mut DriftidPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Simulates `n` particles of `dX = (u + Φ'(X)) dt + σ dW` on `[a, b]`,
/// observed at `steps + 1` equally spaced times in `[0, final_time]`, started
/// uniformly. `periodic` selects wrapping, otherwise reflection.
///
/// # Safety
/// `potential` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn driftid_simulate(
    potential: *const DriftidPotential,
    constant_flux: f64,
    sigma: f64,
    final_time: f64,
    steps: usize,
    a: f64,
    b: f64,
    periodic: bool,
    n: usize,
    seed: u64,
    out: *mut *mut DriftidTrajectories,
) -> DriftidStatus {
    guard(|| {
        let p = nonnull(potential, "potential")?.0.clone();
        let mode = if periodic {
            BoundaryMode::Periodic
        } else {
            BoundaryMode::Reflecting
        };
        let domain = Domain::new(a, b, mode).map_err(from_lib)?;
        let drift = DriftSpec::for_domain(p, constant_flux, &domain).map_err(from_lib)?;
        let schedule = TimeSchedule::uniform(final_time, steps).map_err(from_lib)?;
        let law = InitialLaw::uniform(a, b).map_err(from_lib)?;
        let set = simulate_trajectories(&drift, sigma, &schedule, &law, &domain, n, seed)
            .map_err(from_lib)?;
        write(
            out,
            Box::into_raw(Box::new(DriftidTrajectories(set))),
            "out",
        )
    })
}

/// Number of particles, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn driftid_trajectories_particles(t: *const DriftidTrajectories) -> usize {
    t.as_ref().map_or(0, |t| t.0.particles())
}

/// Number of observation intervals `M`, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn driftid_trajectories_steps(t: *const DriftidTrajectories) -> usize {
    t.as_ref().map_or(0, |t| t.0.schedule().steps())
}

/// Copies the positions, particle-major (`particles × (steps + 1)`), into `buf`.
///
/// # Safety
/// `t` must be a live handle and `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn driftid_trajectories_copy_positions(
    t: *const DriftidTrajectories,
    buf: *mut f64,
    len: usize,
) -> DriftidStatus {
    guard(|| {
        let pos = nonnull(t, "trajectories")?.0.positions();
        if len < pos.len() {
            return Err(invalid("buffer is shorter than particles × (steps + 1)"));
        }
        if buf.is_null() {
            return Err((DriftidStatus::NullPointer, "buf is null".into()));
        }
        ptr::copy_nonoverlapping(pos.as_ptr(), buf, pos.len());
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn driftid_trajectories_free(t: *mut DriftidTrajectories) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// MAP estimate of a `num_modes`-mode potential from the paths, with known
/// flux `constant_flux` and penalty `alpha ‖Φ‖²_{H^order}` (`alpha = 0`
/// disables it). `converged` may be null.
///
/// # Safety
/// `t` must be a live handle, `out` writable and `converged` null or writable.
#[no_mangle]
pub unsafe extern "C" fn driftid_infer(
    t: *const DriftidTrajectories,
    constant_flux: f64,
    num_modes: usize,
    alpha: f64,
    order: f64,
    out: *mut *mut DriftidPotential,
    converged: *mut bool,
) -> DriftidStatus {
    guard(|| {
        let data = &nonnull(t, "trajectories")?.0;
        let model = ModelSpec {
            constant_flux,
            num_modes,
            sigma: data.sigma(),
            domain: *data.domain(),
        };
        let order = SobolevOrder::new(order).map_err(from_lib)?;
        let tik = TikhonovConfig::new(alpha, order).map_err(from_lib)?;
        let r = infer_map(data, &model, &tik, &OptimizerConfig::default()).map_err(from_lib)?;
        if !converged.is_null() {
            converged.write(r.converged);
        }
        write(
            out,
            Box::into_raw(Box::new(DriftidPotential(r.theta_hat))),
            "out",
        )
    })
}

/// `‖Φ_a − Φ_b‖_{L²}` over one period.
///
/// # Safety
/// `a`, `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn driftid_l2_error(
    a: *const DriftidPotential,
    b: *const DriftidPotential,
    out: *mut f64,
) -> DriftidStatus {
    guard(|| {
        let e = l2_error(&nonnull(a, "a")?.0, &nonnull(b, "b")?.0).map_err(from_lib)?;
        write(out, e, "out")
    })
}

/// Least-squares line through `(ln n_i, ln error_i)` with its residual RMS;
/// needs `len >= 3` and positive values.
///
/// # Safety
/// `n` and `error` must hold `len` values; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn driftid_fit_rate(
    n: *const f64,
    error: *const f64,
    len: usize,
    slope: *mut f64,
    intercept: *mut f64,
    residual: *mut f64,
) -> DriftidStatus {
    guard(|| {
        let ns = slice(n, len, "n")?;
        let es = slice(error, len, "error")?;
        let points: Vec<(f64, f64)> = ns.iter().copied().zip(es.iter().copied()).collect();
        let fit = fit_rate(&points).map_err(from_lib)?;
        write(slope, fit.slope, "slope")?;
        write(intercept, fit.intercept, "intercept")?;
        write(residual, fit.residual, "residual")
    })
}
