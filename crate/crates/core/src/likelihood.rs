//! Negative log-likelihood of trajectory data under the Euler–Maruyama
//! transition law, and the Tikhonov objective built on it.
//!
//! One Euler–Maruyama step from `x` has law `N(x + Δt μ(x), σ² Δt)`. On a
//! periodic domain the observed position is that Gaussian wrapped onto the
//! circle; on a reflecting domain it is the Gaussian folded into `[a, b]`.
//! Both are evaluated as sums over image points, truncated once the tail is
//! below `1e-14`. The `ln g⁰(q⁰)` term does not depend on the drift and is
//! left out, so all values are defined up to an additive constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::{for_each_harmonic, DriftSpec, FourierPotential, SobolevOrder};
use crate::sde::{BoundaryMode, Domain, TrajectorySet};

/// Noise level, shift and geometry of the data fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityConfig {
    pub sigma: f64,
    /// Shift `τ` of the fidelity. Only `τ = 0` is supported on trajectory
    /// data; the shifted functionals live in [`crate::divergences`].
    #[serde(default)]
    pub tau: f64,
    pub domain: Domain,
}

impl FidelityConfig {
    pub fn new(sigma: f64, domain: Domain) -> Result<Self> {
        let cfg = Self {
            sigma,
            tau: 0.0,
            domain,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.tau != 0.0 {
            return Err(Error::Config(
                "the trajectory likelihood uses tau = 0; use the gridded shifted fidelity for tau > 0"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.domain.mode()
    }
}

/// Regularization weight `α` and Sobolev order `r` of the penalty `α ‖Φ‖²_{H^r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TikhonovConfig {
    pub alpha: f64,
    pub order: SobolevOrder,
}

impl TikhonovConfig {
    pub fn new(alpha: f64, order: SobolevOrder) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self { alpha, order })
    }

    pub fn unregularized() -> Self {
        Self {
            alpha: 0.0,
            order: SobolevOrder::L2,
        }
    }
}

/// Number of images on each side: `ceil(6 σ √Δt / L) + 1`.
fn image_cutoff(std: f64, length: f64) -> i64 {
    (6.0 * std / length).ceil() as i64 + 1
}

/// Log-density of one transition and its derivative in the Gaussian mean.
///
/// Returns `(ln p, ∂ ln p / ∂ mean)`.
fn transition_terms(x_next: f64, mean: f64, var: f64, domain: &Domain) -> (f64, f64) {
    let std = var.sqrt();
    let norm = -0.5 * (2.0 * PI * var).ln();
    match domain.mode() {
        BoundaryMode::Periodic => {
            let len = domain.length();
            let d0 = x_next - mean;
            let d0 = d0 - len * (d0 / len).round();
            let m = image_cutoff(std, len);
            log_sum_gauss((-m..=m).map(|k| d0 + k as f64 * len), var, norm)
        }
        BoundaryMode::Reflecting => {
            // preimages of x_next under the fold: x + 2kL and 2a - x + 2kL
            let len = domain.length();
            let period = 2.0 * len;
            let direct = x_next - mean;
            let mirrored = 2.0 * domain.a() - x_next - mean;
            let direct = direct - period * (direct / period).round();
            let mirrored = mirrored - period * (mirrored / period).round();
            let m = image_cutoff(std, period);
            let ds = (-m..=m).flat_map(|k| {
                let s = k as f64 * period;
                [direct + s, mirrored + s]
            });
            log_sum_gauss(ds, var, norm)
        }
    }
}

fn log_sum_gauss(ds: impl Iterator<Item = f64> + Clone, var: f64, norm: f64) -> (f64, f64) {
    let peak = ds
        .clone()
        .map(|d| -0.5 * d * d / var)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut weighted = 0.0;
    for d in ds {
        let w = (-0.5 * d * d / var - peak).exp();
        total += w;
        weighted += w * d;
    }
    (norm + peak + total.ln(), weighted / total / var)
}

/// Log-density of `x_next` given `x_prev` after one Euler–Maruyama step of length `dt`.
pub fn transition_logdensity(
    x_prev: f64,
    x_next: f64,
    drift: &DriftSpec,
    cfg: &FidelityConfig,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let mean = x_prev + dt * drift.eval(x_prev);
    Ok(transition_terms(x_next, mean, cfg.sigma * cfg.sigma * dt, &cfg.domain).0)
}

fn check_data(data: &TrajectorySet, cfg: &FidelityConfig, theta: &FourierPotential) -> Result<()> {
    cfg.validate()?;
    if data.domain() != &cfg.domain {
        return Err(Error::Config(
            "data domain differs from the fidelity domain".into(),
        ));
    }
    if cfg.domain.mode() == BoundaryMode::Periodic
        && (theta.period_length() - cfg.domain.length()).abs() > 1e-12 * cfg.domain.length()
    {
        return Err(Error::Model(
            "potential period differs from the periodic domain length".into(),
        ));
    }
    Ok(())
}

/// Fidelity value and gradient for one path.
fn path_value_grad(
    path: &[f64],
    drift: &DriftSpec,
    cfg: &FidelityConfig,
    data: &TrajectorySet,
    grad: &mut [f64],
) -> f64 {
    let potential = drift.potential();
    let k_max = potential.num_modes();
    let length = potential.period_length();
    let (cos, sin) = (potential.cos_coeffs(), potential.sin_coeffs());
    let var_rate = cfg.sigma * cfg.sigma;
    let mut value = 0.0;
    for (i, dt) in data.schedule().increments().enumerate() {
        let (x, y) = (path[i], path[i + 1]);
        // μ(x) and ∂μ/∂θ from one pass over the harmonics
        let mut mu = drift.constant_flux();
        for_each_harmonic(x, length, k_max, |k, s, c| {
            let w = 2.0 * PI * (k + 1) as f64 / length;
            mu += w * (-cos[k] * s + sin[k] * c);
        });
        let (logp, dlogp_dmean) = transition_terms(y, x + dt * mu, var_rate * dt, &cfg.domain);
        value -= logp;
        let scale = -dlogp_dmean * dt;
        for_each_harmonic(x, length, k_max, |k, s, c| {
            let w = 2.0 * PI * (k + 1) as f64 / length;
            grad[k] += scale * (-w * s);
            grad[k_max + k] += scale * (w * c);
        });
    }
    value
}

/// Value and gradient of the negative log-likelihood `-(1/n) Σ_j Σ_i ln p(q_j^i | q_j^{i-1})`.
///
/// Paths are processed in parallel and reduced in index order, so the result
/// does not depend on the thread count.
pub fn neg_log_likelihood_value_grad(
    theta: &FourierPotential,
    data: &TrajectorySet,
    cfg: &FidelityConfig,
    constant_flux: f64,
) -> Result<(f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::Usage("likelihood of an empty data set".into()));
    }
    check_data(data, cfg, theta)?;
    let drift = DriftSpec::new(theta.clone(), constant_flux)?;
    let dim = 2 * theta.num_modes();
    let parts: Vec<(f64, Vec<f64>)> = (0..data.particles())
        .into_par_iter()
        .map(|j| {
            let mut g = vec![0.0; dim];
            let v = path_value_grad(data.path(j), &drift, cfg, data, &mut g);
            (v, g)
        })
        .collect();
    let inv_n = 1.0 / data.particles() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; dim];
    for (v, g) in &parts {
        value += v;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    grad.iter_mut().for_each(|g| *g *= inv_n);
    Ok((value * inv_n, grad))
}

pub fn neg_log_likelihood(
    theta: &FourierPotential,
    data: &TrajectorySet,
    cfg: &FidelityConfig,
    constant_flux: f64,
) -> Result<f64> {
    Ok(neg_log_likelihood_value_grad(theta, data, cfg, constant_flux)?.0)
}

pub fn neg_log_likelihood_grad(
    theta: &FourierPotential,
    data: &TrajectorySet,
    cfg: &FidelityConfig,
    constant_flux: f64,
) -> Result<Vec<f64>> {
    Ok(neg_log_likelihood_value_grad(theta, data, cfg, constant_flux)?.1)
}

/// `T(θ) = S(F(θ), Gⁿ) + α ‖Φ_θ‖²_{H^r}` with its gradient.
///
/// An empty data set contributes nothing, leaving the penalty alone.
pub fn tikhonov_objective(
    theta: &FourierPotential,
    data: &TrajectorySet,
    cfg: &FidelityConfig,
    tikhonov: &TikhonovConfig,
    constant_flux: f64,
) -> Result<(f64, Vec<f64>)> {
    let (mut value, mut grad) = if data.is_empty() {
        (0.0, vec![0.0; 2 * theta.num_modes()])
    } else {
        neg_log_likelihood_value_grad(theta, data, cfg, constant_flux)?
    };
    if tikhonov.alpha > 0.0 {
        value += tikhonov.alpha * theta.sobolev_norm_sq(tikhonov.order);
        for (g, p) in grad
            .iter_mut()
            .zip(theta.sobolev_norm_sq_grad(tikhonov.order))
        {
            *g += tikhonov.alpha * p;
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::TimeSchedule;

    fn flux(u: f64) -> DriftSpec {
        DriftSpec::new(FourierPotential::zeros(2, 1.0).unwrap(), u).unwrap()
    }

    fn periodic_cfg() -> FidelityConfig {
        FidelityConfig::new(1.0, Domain::unit(BoundaryMode::Periodic)).unwrap()
    }

    #[test]
    fn closed_form_log_density() {
        let peak = -0.5 * (2.0 * PI * 0.01f64).ln();
        let cfg = periodic_cfg();
        let v = transition_logdensity(0.5, 0.55, &flux(5.0), &cfg, 0.01).unwrap();
        assert!((v - peak).abs() < 1e-12);
        assert!((v - 1.383647).abs() < 1e-6);
        let off = transition_logdensity(0.5, 0.65, &flux(5.0), &cfg, 0.01).unwrap();
        assert!((off - (peak - 0.5)).abs() < 1e-12);
        assert!((off - 0.883647).abs() < 1e-6);
    }

    #[test]
    fn wrapping_is_invisible_for_narrow_kernels() {
        // mean 0.95 + 0.05 = 1.0 wraps to 0.0; compare with the plain Gaussian
        let cfg = periodic_cfg();
        let dt = 0.01;
        let v = transition_logdensity(0.95, 0.02, &flux(5.0), &cfg, dt).unwrap();
        let d: f64 = 0.02;
        let plain = -0.5 * (2.0 * PI * dt).ln() - 0.5 * d * d / dt;
        assert!((v - plain).abs() < 1e-12);
    }

    #[test]
    fn reflecting_density_folds_mass_back() {
        let cfg = FidelityConfig::new(1.0, Domain::unit(BoundaryMode::Reflecting)).unwrap();
        let zero = flux(0.0);
        // at the wall the folded density is twice the Gaussian
        let v = transition_logdensity(0.0, 0.0, &zero, &cfg, 0.01).unwrap();
        let plain = -0.5 * (2.0 * PI * 0.01f64).ln();
        assert!((v - (plain + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn tau_must_be_zero() {
        let mut cfg = periodic_cfg();
        cfg.tau = 0.1;
        assert!(cfg.validate().is_err());
        assert!(transition_logdensity(0.5, 0.5, &flux(0.0), &cfg, 0.0).is_err());
    }

    #[test]
    fn single_transition_reduces_to_log_density() {
        let sched = TimeSchedule::uniform(0.01, 1).unwrap();
        let dom = Domain::unit(BoundaryMode::Periodic);
        let data = TrajectorySet::from_positions(vec![0.3, 0.41], 1, sched, 1.0, 0, dom).unwrap();
        let theta = FourierPotential::two_well(3, 1.0).unwrap();
        let drift = DriftSpec::new(theta.clone(), 5.0).unwrap();
        let cfg = periodic_cfg();
        let nll = neg_log_likelihood(&theta, &data, &cfg, 5.0).unwrap();
        let single = transition_logdensity(0.3, 0.41, &drift, &cfg, 0.01).unwrap();
        assert_eq!(nll, -single);
    }

    #[test]
    fn zero_residuals_give_zero_gradient() {
        let theta = FourierPotential::new(vec![0.1, 0.02], vec![0.05, -0.03], 1.0).unwrap();
        let drift = DriftSpec::new(theta.clone(), 0.7).unwrap();
        let sched = TimeSchedule::uniform(0.1, 10).unwrap();
        let dom = Domain::unit(BoundaryMode::Periodic);
        let mut positions = Vec::new();
        for start in [0.1, 0.45, 0.8] {
            let mut x: f64 = start;
            positions.push(x);
            for _ in 0..10 {
                x = crate::sde::apply_boundary(x + 0.01 * drift.eval(x), &dom).unwrap();
                positions.push(x);
            }
        }
        let data = TrajectorySet::from_positions(positions, 3, sched, 0.5, 0, dom).unwrap();
        let cfg = FidelityConfig::new(0.5, dom).unwrap();
        let g = neg_log_likelihood_grad(&theta, &data, &cfg, 0.7).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.iter().all(|v| v.abs() < 1e-10), "{g:?}");
    }

    #[test]
    fn empty_data_objective_is_the_penalty() {
        let sched = TimeSchedule::uniform(1.0, 3).unwrap();
        let dom = Domain::unit(BoundaryMode::Periodic);
        let empty = TrajectorySet::from_positions(vec![], 0, sched, 1.0, 0, dom).unwrap();
        let theta = FourierPotential::new(vec![0.3, -0.1], vec![0.2, 0.4], 1.0).unwrap();
        let order = SobolevOrder::new(1.0).unwrap();
        let tik = TikhonovConfig::new(1.0, order).unwrap();
        let (v, g) = tikhonov_objective(&theta, &empty, &periodic_cfg(), &tik, 5.0).unwrap();
        assert_eq!(v, theta.sobolev_norm_sq(order));
        let expected: Vec<f64> = (0..2)
            .map(|k| 1.0 + (2.0 * PI * (k + 1) as f64).powi(2))
            .collect();
        assert!((g[0] - expected[0] * 0.3).abs() < 1e-12);
        assert!((g[3] - expected[1] * 0.4).abs() < 1e-12);
        assert!(neg_log_likelihood(&theta, &empty, &periodic_cfg(), 5.0).is_err());
    }
}
