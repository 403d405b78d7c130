//! Fourier parameterization of the potential and of the drift it induces.
//!
//! The potential is a trigonometric polynomial without constant term,
//!
//! ```text
//! Φ(x) = Σ_{k=1..K} a_k cos(2πk x / L) + b_k sin(2πk x / L),
//! ```
//!
//! and the drift is `μ(x) = u + Φ'(x)` for a known constant flux `u`.
//! Since `μ` is affine in the coefficient vector `θ = (a_1..a_K, b_1..b_K)`,
//! its Jacobian with respect to `θ` does not depend on `θ`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sde::{BoundaryMode, Domain};

/// Tolerance used when checking that a drift vanishes on a reflecting boundary.
const BOUNDARY_DRIFT_TOL: f64 = 1e-10;

/// Trigonometric potential with `K` cosine and `K` sine modes on a period `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierPotential {
    cos: Vec<f64>,
    sin: Vec<f64>,
    length: f64,
}

impl FourierPotential {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>, length: f64) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(Error::Dimension(format!(
                "cos has {} modes but sin has {}",
                cos.len(),
                sin.len()
            )));
        }
        if cos.is_empty() {
            return Err(Error::Config("a potential needs at least one mode".into()));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Config(format!(
                "period length must be positive, got {length}"
            )));
        }
        if cos.iter().chain(&sin).any(|c| !c.is_finite()) {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        Ok(Self { cos, sin, length })
    }

    pub fn zeros(num_modes: usize, length: f64) -> Result<Self> {
        Self::new(vec![0.0; num_modes], vec![0.0; num_modes], length)
    }

    /// Builds a potential from a packed coefficient vector `(a_1..a_K, b_1..b_K)`.
    pub fn from_theta(theta: &[f64], length: f64) -> Result<Self> {
        if theta.len() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "packed coefficient vector must have even length, got {}",
                theta.len()
            )));
        }
        let k = theta.len() / 2;
        Self::new(theta[..k].to_vec(), theta[k..].to_vec(), length)
    }

    /// The two-well ground truth used by the experiments: `a_2 = 0.1`, `b_1 = 0.05`.
    pub fn two_well(num_modes: usize, length: f64) -> Result<Self> {
        if num_modes < 2 {
            return Err(Error::Config("the two-well potential needs K >= 2".into()));
        }
        let mut p = Self::zeros(num_modes, length)?;
        p.cos[1] = 0.1;
        p.sin[0] = 0.05;
        Ok(p)
    }

    pub fn num_modes(&self) -> usize {
        self.cos.len()
    }

    pub fn period_length(&self) -> f64 {
        self.length
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    /// Packed coefficient vector `(a_1..a_K, b_1..b_K)`.
    pub fn theta(&self) -> Vec<f64> {
        self.cos.iter().chain(&self.sin).copied().collect()
    }

    /// Zero-pads both coefficient vectors to `num_modes` modes.
    pub fn padded(&self, num_modes: usize) -> Self {
        let mut out = self.clone();
        if num_modes > out.cos.len() {
            out.cos.resize(num_modes, 0.0);
            out.sin.resize(num_modes, 0.0);
        }
        out
    }

    fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for_each_harmonic(x, self.length, self.num_modes(), |k, s, c| {
            acc += self.cos[k] * c + self.sin[k] * s;
        });
        acc
    }

    /// `Φ'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for_each_harmonic(x, self.length, self.num_modes(), |k, s, c| {
            let w = self.wavenumber(k + 1);
            acc += w * (-self.cos[k] * s + self.sin[k] * c);
        });
        acc
    }

    /// Squared Sobolev norm through the Fourier multiplier `(1 + (2πk/L)²)^r`.
    ///
    /// Each mode contributes `L (a_k² + b_k²) / 2`, the exact integral of its
    /// square over one period, so `r = 0` is the plain squared L² norm.
    pub fn sobolev_norm_sq(&self, order: SobolevOrder) -> f64 {
        (0..self.num_modes())
            .map(|k| {
                let m = sobolev_multiplier(self.wavenumber(k + 1), order);
                m * 0.5 * self.length * (self.cos[k] * self.cos[k] + self.sin[k] * self.sin[k])
            })
            .sum()
    }

    /// Gradient of [`Self::sobolev_norm_sq`] with respect to the packed coefficients.
    pub fn sobolev_norm_sq_grad(&self, order: SobolevOrder) -> Vec<f64> {
        let k_max = self.num_modes();
        let mut grad = vec![0.0; 2 * k_max];
        for k in 0..k_max {
            let m = sobolev_multiplier(self.wavenumber(k + 1), order) * self.length;
            grad[k] = m * self.cos[k];
            grad[k_max + k] = m * self.sin[k];
        }
        grad
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let cos = self
            .cos
            .iter()
            .zip(&other.cos)
            .map(|(a, b)| a - b)
            .collect();
        let sin = self
            .sin
            .iter()
            .zip(&other.sin)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(cos, sin, self.length)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.num_modes() != other.num_modes() {
            return Err(Error::Dimension(format!(
                "potentials have {} and {} modes",
                self.num_modes(),
                other.num_modes()
            )));
        }
        if self.length != other.length {
            return Err(Error::Dimension(format!(
                "potentials have period lengths {} and {}",
                self.length, other.length
            )));
        }
        Ok(())
    }
}

fn sobolev_multiplier(wavenumber: f64, order: SobolevOrder) -> f64 {
    (1.0 + wavenumber * wavenumber).powf(order.0)
}

/// Calls `f(k, sin(2π(k+1)x/L), cos(2π(k+1)x/L))` for `k = 0..num_modes`,
/// generating higher harmonics by the angle-addition recurrence.
#[inline]
pub(crate) fn for_each_harmonic(
    x: f64,
    length: f64,
    num_modes: usize,
    mut f: impl FnMut(usize, f64, f64),
) {
    let (s1, c1) = (2.0 * PI * x / length).sin_cos();
    let (mut s, mut c) = (s1, c1);
    for k in 0..num_modes {
        f(k, s, c);
        let next_s = s * c1 + c * s1;
        let next_c = c * c1 - s * s1;
        s = next_s;
        c = next_c;
    }
}

/// Smoothness exponent `r >= 0` of the Sobolev penalty.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SobolevOrder(f64);

impl SobolevOrder {
    pub const L2: SobolevOrder = SobolevOrder(0.0);

    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Config(format!(
                "Sobolev order must be >= 0, got {r}"
            )));
        }
        Ok(Self(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SobolevOrder {
    type Error = Error;
    fn try_from(r: f64) -> Result<Self> {
        Self::new(r)
    }
}

impl From<SobolevOrder> for f64 {
    fn from(r: SobolevOrder) -> f64 {
        r.0
    }
}

/// Bregman distance of the quadratic penalty `J = ‖·‖²_{H^r}`.
///
/// For quadratic `J` this is `J(p - q)` and in particular symmetric.
pub fn bregman_distance(
    p: &FourierPotential,
    q: &FourierPotential,
    order: SobolevOrder,
) -> Result<f64> {
    Ok(p.sub(q)?.sobolev_norm_sq(order))
}

/// Drift `μ = u + Φ'` built from a potential and a constant flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DriftJson", into = "DriftJson")]
pub struct DriftSpec {
    potential: FourierPotential,
    constant_flux: f64,
}

impl DriftSpec {
    pub fn new(potential: FourierPotential, constant_flux: f64) -> Result<Self> {
        if !constant_flux.is_finite() {
            return Err(Error::Config("constant flux must be finite".into()));
        }
        Ok(Self {
            potential,
            constant_flux,
        })
    }

    /// Builds a drift and checks it against the boundary behaviour of `domain`.
    ///
    /// Periodic domains need the potential period to equal the domain length.
    /// Reflecting domains need `u = 0` and a drift vanishing at both ends.
    pub fn for_domain(
        potential: FourierPotential,
        constant_flux: f64,
        domain: &Domain,
    ) -> Result<Self> {
        let drift = Self::new(potential, constant_flux)?;
        drift.check_domain(domain)?;
        Ok(drift)
    }

    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        match domain.mode() {
            BoundaryMode::Periodic => {
                if (self.potential.length - domain.length()).abs() > 1e-12 * domain.length() {
                    return Err(Error::Model(format!(
                        "periodic domain has length {} but the potential period is {}",
                        domain.length(),
                        self.potential.length
                    )));
                }
            }
            BoundaryMode::Reflecting => {
                if self.constant_flux != 0.0 {
                    return Err(Error::Model(format!(
                        "a reflecting boundary requires zero constant flux, got {}",
                        self.constant_flux
                    )));
                }
                let scale = 1.0 + self.max_abs_derivative_bound();
                for end in [domain.a(), domain.b()] {
                    let m = self.eval(end);
                    if m.abs() > BOUNDARY_DRIFT_TOL * scale {
                        return Err(Error::Model(format!(
                            "drift {m} does not vanish at reflecting boundary {end}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> &FourierPotential {
        &self.potential
    }

    pub fn constant_flux(&self) -> f64 {
        self.constant_flux
    }

    /// `μ(x) = u + Φ'(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.constant_flux + self.potential.derivative(x)
    }

    /// `∂μ(x)/∂θ`, length `2K`.
    pub fn coeff_jacobian(&self, x: f64) -> Vec<f64> {
        let k_max = self.potential.num_modes();
        let mut out = vec![0.0; 2 * k_max];
        self.coeff_jacobian_into(x, &mut out);
        out
    }

    pub(crate) fn coeff_jacobian_into(&self, x: f64, out: &mut [f64]) {
        let p = &self.potential;
        let k_max = p.num_modes();
        for_each_harmonic(x, p.length, k_max, |k, s, c| {
            let w = p.wavenumber(k + 1);
            out[k] = -w * s;
            out[k_max + k] = w * c;
        });
    }

    /// Upper bound on `sup |Φ'|` from the coefficients.
    pub fn max_abs_derivative_bound(&self) -> f64 {
        let p = &self.potential;
        (0..p.num_modes())
            .map(|k| p.wavenumber(k + 1) * p.cos[k].hypot(p.sin[k]))
            .sum()
    }

    /// Upper bound on `sup |μ|`.
    pub fn max_abs_bound(&self) -> f64 {
        self.constant_flux.abs() + self.max_abs_derivative_bound()
    }

    pub fn with_potential(&self, potential: FourierPotential) -> Self {
        Self {
            potential,
            constant_flux: self.constant_flux,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DriftJson {
    #[serde(rename = "L")]
    length: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    #[serde(default)]
    u: f64,
}

impl TryFrom<DriftJson> for DriftSpec {
    type Error = Error;
    fn try_from(j: DriftJson) -> Result<Self> {
        DriftSpec::new(FourierPotential::new(j.cos, j.sin, j.length)?, j.u)
    }
}

impl From<DriftSpec> for DriftJson {
    fn from(d: DriftSpec) -> Self {
        DriftJson {
            length: d.potential.length,
            cos: d.potential.cos,
            sin: d.potential.sin,
            u: d.constant_flux,
        }
    }
}
