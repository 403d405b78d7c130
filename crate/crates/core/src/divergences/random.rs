//! Random smooth densities and Markov kernels for the validation suites.

use rand::Rng;
use std::f64::consts::PI;

use super::product::KernelStack;
use crate::error::{Error, Result};
use crate::fokker_planck::{DensityField, SpatialGrid};

/// Random trigonometric polynomial of degree `order` in `dims` variables,
/// evaluated on the tensor grid (last coordinate fastest).
fn random_trig_field<R: Rng + ?Sized>(
    grid: &SpatialGrid,
    dims: usize,
    order: usize,
    rng: &mut R,
) -> Vec<f64> {
    let n = grid.len();
    let omega = 2.0 * PI / grid.length();
    let nodes = grid.nodes();
    // basis per coordinate: 1, cos(kx), sin(kx) for k = 1..=order
    let basis: Vec<Vec<f64>> = (0..=2 * order)
        .map(|b| {
            nodes
                .iter()
                .map(|x| match b {
                    0 => 1.0,
                    b if b % 2 == 1 => (omega * ((b + 1) / 2) as f64 * (x - grid.a())).cos(),
                    b => (omega * (b / 2) as f64 * (x - grid.a())).sin(),
                })
                .collect()
        })
        .collect();
    let terms = (2 * order + 1).pow(dims as u32);
    let coeffs: Vec<f64> = (0..terms).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cells = n.pow(dims as u32);
    (0..cells)
        .map(|cell| {
            let idx: Vec<usize> = (0..dims)
                .rev()
                .map(|d| (cell / n.pow(d as u32)) % n)
                .collect();
            coeffs
                .iter()
                .enumerate()
                .map(|(t, c)| {
                    let mut term = *c;
                    let mut rest = t;
                    for i in idx.iter().rev() {
                        term *= basis[rest % (2 * order + 1)][*i];
                        rest /= 2 * order + 1;
                    }
                    term
                })
                .sum()
        })
        .collect()
}

/// Squared random trigonometric polynomial plus `floor`, normalized to
/// unit mass: smooth and bounded below by a positive constant.
pub fn random_density<R: Rng + ?Sized>(
    grid: &SpatialGrid,
    order: usize,
    floor: f64,
    rng: &mut R,
) -> Result<DensityField> {
    if !(floor > 0.0) {
        return Err(Error::Config("floor must be positive".into()));
    }
    let values = random_trig_field(grid, 1, order, rng)
        .into_iter()
        .map(|v| v * v + floor)
        .collect();
    DensityField::new(*grid, values)?.normalized()
}

/// Markov kernel `z(x, x0)` built from a squared random trigonometric
/// polynomial in `(x, x0)` plus `floor`, each column normalized.
pub fn random_kernel<R: Rng + ?Sized>(
    grid: &SpatialGrid,
    order: usize,
    floor: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(floor > 0.0) {
        return Err(Error::Config("floor must be positive".into()));
    }
    let mut k: Vec<f64> = random_trig_field(grid, 2, order, rng)
        .into_iter()
        .map(|v| v * v + floor)
        .collect();
    normalize_columns(&mut k, grid);
    Ok(k)
}

fn normalize_columns(k: &mut [f64], grid: &SpatialGrid) {
    let n = grid.len();
    for x0 in 0..n {
        let mass = (0..n).map(|x| k[x * n + x0]).sum::<f64>() * grid.dx();
        (0..n).for_each(|x| k[x * n + x0] /= mass);
    }
}

/// Alternately normalizes columns and rows until both integrate to one
/// (a doubly stochastic kernel); ends on a column pass so the result is an
/// exact Markov kernel. Returns the remaining row error.
pub fn sinkhorn_balance(
    k: &mut [f64],
    grid: &SpatialGrid,
    tol: f64,
    max_iters: usize,
) -> Result<f64> {
    let n = grid.len();
    let dx = grid.dx();
    let row_error = |k: &[f64]| {
        (0..n)
            .map(|x| (k[x * n..(x + 1) * n].iter().sum::<f64>() * dx - 1.0).abs())
            .fold(0.0, f64::max)
    };
    for _ in 0..max_iters {
        normalize_columns(k, grid);
        let err = row_error(k);
        if err <= tol {
            return Ok(err);
        }
        for x in 0..n {
            let mass = k[x * n..(x + 1) * n].iter().sum::<f64>() * dx;
            k[x * n..(x + 1) * n].iter_mut().for_each(|v| *v /= mass);
        }
    }
    normalize_columns(k, grid);
    let err = row_error(k);
    if err > tol {
        return Err(Error::Numerical(format!(
            "Sinkhorn balancing stalled at row error {err:e}"
        )));
    }
    Ok(err)
}

/// Stack of `m` random kernels; doubly stochastic when `balanced` is set.
pub fn random_kernel_stack<R: Rng + ?Sized>(
    grid: &SpatialGrid,
    m: usize,
    order: usize,
    floor: f64,
    balanced: bool,
    rng: &mut R,
) -> Result<KernelStack> {
    let kernels = (0..m)
        .map(|_| {
            let mut k = random_kernel(grid, order, floor, rng)?;
            if balanced {
                sinkhorn_balance(&mut k, grid, 1e-13, 10_000)?;
            }
            Ok(k)
        })
        .collect::<Result<Vec<_>>>()?;
    KernelStack::new(*grid, kernels)
}
