//! Product densities `z^π = g⁰ Π z_i` on `Ω^{M+1}` and the functionals
//! built from them.

use serde::Serialize;

use super::kl::{kl_divergence_values, l2_distance_sq, sup_norm, BoundMargin};
use crate::error::{Error, Result};
use crate::fokker_planck::{DensityField, ForwardOperator, SpatialGrid};

/// Largest number of steps for which `z^π` is materialized.
pub const MAX_PRODUCT_STEPS: usize = 2;
/// Largest number of tensor cells `N^{M+1}`.
pub const MAX_PRODUCT_CELLS: usize = 1 << 24;

const MARKOV_TOL: f64 = 1e-8;

/// `M` transition kernels on a grid, each stored row-major as `z[x][x0]`
/// with `∫ z(x, x0) dx = 1` for every `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStack {
    grid: SpatialGrid,
    kernels: Vec<Vec<f64>>,
}

impl KernelStack {
    pub fn new(grid: SpatialGrid, kernels: Vec<Vec<f64>>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Config("need at least one kernel".into()));
        }
        let n = grid.len();
        for (i, k) in kernels.iter().enumerate() {
            if k.len() != n * n {
                return Err(Error::Dimension(format!(
                    "kernel {i} has {} values, expected {}",
                    k.len(),
                    n * n
                )));
            }
            if k.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "kernel {i} has negative or non-finite values"
                )));
            }
            for x0 in 0..n {
                let mass = (0..n).map(|x| k[x * n + x0]).sum::<f64>() * grid.dx();
                if (mass - 1.0).abs() > MARKOV_TOL {
                    return Err(Error::Domain(format!(
                        "kernel {i} column {x0} has mass {mass}, expected 1"
                    )));
                }
            }
        }
        Ok(Self { grid, kernels })
    }

    pub fn from_forward(f: &ForwardOperator) -> Result<Self> {
        Self::new(
            *f.grid(),
            (0..f.len()).map(|i| f.kernel(i).to_vec()).collect(),
        )
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernel(&self, i: usize) -> &[f64] {
        &self.kernels[i]
    }

    /// `‖z - u‖²` in `L²(Ω×Ω)^M`.
    pub fn l2_distance_sq(&self, other: &KernelStack) -> Result<f64> {
        self.check_compatible(other)?;
        let dx = self.grid.dx();
        Ok(self
            .kernels
            .iter()
            .zip(&other.kernels)
            .map(|(a, b)| l2_distance_sq(a, b, dx * dx))
            .sum())
    }

    fn check_compatible(&self, other: &KernelStack) -> Result<()> {
        if self.grid != other.grid || self.steps() != other.steps() {
            return Err(Error::Dimension(
                "kernel stacks differ in grid or length".into(),
            ));
        }
        Ok(())
    }
}

/// `z^π(x⁰, …, x^M) = g⁰(x⁰) Π_i z_i(x^i, x^{i-1})` on the tensor grid,
/// stored with `x⁰` varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDensity {
    grid: SpatialGrid,
    steps: usize,
    values: Vec<f64>,
}

impl ProductDensity {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Volume `dx^{M+1}` of one tensor cell.
    pub fn cell_measure(&self) -> f64 {
        self.grid.dx().powi(self.steps as i32 + 1)
    }

    /// `|Ω|^{M+1}`.
    pub fn volume(&self) -> f64 {
        self.grid.length().powi(self.steps as i32 + 1)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_measure()
    }

    /// Flat index of the tensor cell holding `point ∈ Ω^{M+1}`.
    pub fn cell_index(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.steps + 1 {
            return Err(Error::Dimension(format!(
                "point of length {} in Ω^{}",
                point.len(),
                self.steps + 1
            )));
        }
        Ok(point
            .iter()
            .fold(0, |acc, x| acc * self.grid.len() + self.grid.cell_of(*x)))
    }

    /// Value at the cell containing `point`.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        Ok(self.values[self.cell_index(point)?])
    }

    /// Marginal density of `x⁰`.
    pub fn marginal_first(&self) -> Vec<f64> {
        let stride = self.values.len() / self.grid.len();
        let w = self.grid.dx().powi(self.steps as i32);
        self.values
            .chunks(stride)
            .map(|c| c.iter().sum::<f64>() * w)
            .collect()
    }
}

/// Materializes `z^π` for `M <= 2`.
pub fn product_density(g0: &DensityField, kernels: &KernelStack) -> Result<ProductDensity> {
    let grid = *kernels.grid();
    if g0.grid() != &grid {
        return Err(Error::Dimension(
            "initial density and kernels live on different grids".into(),
        ));
    }
    let m = kernels.steps();
    if m > MAX_PRODUCT_STEPS {
        return Err(Error::Budget(format!(
            "product densities are limited to M <= {MAX_PRODUCT_STEPS}, got {m}"
        )));
    }
    let n = grid.len();
    let cells = n
        .checked_pow(m as u32 + 1)
        .filter(|c| *c <= MAX_PRODUCT_CELLS);
    let Some(cells) = cells else {
        return Err(Error::Budget(format!(
            "{n}^{} tensor cells exceed the limit {MAX_PRODUCT_CELLS}",
            m + 1
        )));
    };
    let mut values = g0.values().to_vec();
    for z in &kernels.kernels {
        // extend by one coordinate: new[.., prev, next] = old[.., prev] * z[next][prev]
        let mut next = Vec::with_capacity(values.len() * n);
        for (flat, v) in values.iter().enumerate() {
            let prev = flat % n;
            next.extend((0..n).map(|x| v * z[x * n + prev]));
        }
        values = next;
    }
    debug_assert_eq!(values.len(), cells);
    Ok(ProductDensity {
        grid,
        steps: m,
        values,
    })
}

/// `KL^π_τ(z, u) = KL(z^π + τ, u^π + τ)`.
pub fn kl_pi_tau(z: &KernelStack, u: &KernelStack, g0: &DensityField, tau: f64) -> Result<f64> {
    z.check_compatible(u)?;
    let zp = product_density(g0, z)?;
    let up = product_density(g0, u)?;
    kl_divergence_values(zp.values(), up.values(), zp.cell_measure(), tau)
}

fn product_of(y: &KernelStack, g0: &DensityField) -> Result<ProductDensity> {
    product_density(g0, y)
}

/// `S_τ(y, Gⁿ) = -[(1/n) Σ_j ln(y^π(q_j) + τ) + τ ∫ ln(y^π + τ) dx]`,
/// with `y^π` evaluated at the cell containing each data point.
pub fn s_tau_density<P: AsRef<[f64]>>(
    y: &KernelStack,
    points: &[P],
    g0: &DensityField,
    tau: f64,
) -> Result<f64> {
    s_tau_product(&product_of(y, g0)?, points, tau)
}

fn s_tau_product<P: AsRef<[f64]>>(yp: &ProductDensity, points: &[P], tau: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!(
            "shift must be finite and >= 0, got {tau}"
        )));
    }
    if points.is_empty() {
        return Err(Error::Usage("empirical measure has no points".into()));
    }
    let mut data = 0.0;
    for q in points {
        let v = yp.eval(q.as_ref())? + tau;
        if v == 0.0 {
            return Ok(f64::INFINITY);
        }
        data += v.ln();
    }
    data /= points.len() as f64;
    let background = if tau > 0.0 {
        tau * yp.values().iter().map(|v| (v + tau).ln()).sum::<f64>() * yp.cell_measure()
    } else {
        0.0
    };
    Ok(-(data + background))
}

/// The two evaluations of `Err_τ(y)(g†, Gⁿ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrTau {
    /// `∫ ln((y^π+τ)/(g^π+τ)) (dGⁿ - g^π dx)`.
    pub direct: f64,
    /// `KL^π_τ(y, g†) - S_τ(y, Gⁿ) + S_τ(g†, Gⁿ)`.
    pub composed: f64,
}

pub fn err_tau<P: AsRef<[f64]>>(
    y: &KernelStack,
    gdag: &KernelStack,
    points: &[P],
    g0: &DensityField,
    tau: f64,
) -> Result<ErrTau> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("Err_τ needs τ > 0, got {tau}")));
    }
    y.check_compatible(gdag)?;
    let yp = product_of(y, g0)?;
    let gp = product_of(gdag, g0)?;
    let log_ratio: Vec<f64> = yp
        .values()
        .iter()
        .zip(gp.values())
        .map(|(a, b)| ((a + tau) / (b + tau)).ln())
        .collect();
    let mut data = 0.0;
    for q in points {
        data += log_ratio[yp.cell_index(q.as_ref())?];
    }
    if points.is_empty() {
        return Err(Error::Usage("empirical measure has no points".into()));
    }
    data /= points.len() as f64;
    let model = log_ratio
        .iter()
        .zip(gp.values())
        .map(|(l, g)| l * g)
        .sum::<f64>()
        * gp.cell_measure();
    let direct = data - model;
    let kl = kl_divergence_values(yp.values(), gp.values(), yp.cell_measure(), tau)?;
    let composed = kl - s_tau_product(&yp, points, tau)? + s_tau_product(&gp, points, tau)?;
    Ok(ErrTau { direct, composed })
}

/// Both sides of
/// `‖z - u‖²_{L²(Ω×Ω)^M} <= (2M|Ω|^{M-1}/inf g⁰²) max(‖u^π+τ‖_∞, ‖z^π+τ‖_∞) KL^π_τ(z, u)`.
pub fn kl_l2_bound_check(
    z: &KernelStack,
    u: &KernelStack,
    g0: &DensityField,
    tau: f64,
) -> Result<BoundMargin> {
    z.check_compatible(u)?;
    let inf_g0 = g0.min();
    if !(inf_g0 > 0.0) {
        return Err(Error::Domain(
            "initial density must be bounded away from zero".into(),
        ));
    }
    let m = z.steps() as f64;
    let zp = product_density(g0, z)?;
    let up = product_density(g0, u)?;
    let kl = kl_divergence_values(zp.values(), up.values(), zp.cell_measure(), tau)?;
    let sup = (sup_norm(zp.values()) + tau).max(sup_norm(up.values()) + tau);
    let lhs = z.l2_distance_sq(u)?;
    let rhs = 2.0 * m * z.grid().length().powf(m - 1.0) / (inf_g0 * inf_g0) * sup * kl;
    Ok(BoundMargin {
        lhs,
        rhs,
        margin: rhs - lhs,
    })
}
