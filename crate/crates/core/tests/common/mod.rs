#![allow(dead_code)]

use driftid::fokker_planck::{
    build_generator, solve_fp, DensityField, FpBoundary, SpatialGrid, StepPlan,
};
use driftid::likelihood::{tikhonov_objective, FidelityConfig, TikhonovConfig};
use driftid::potential::{DriftSpec, FourierPotential};
use driftid::sde::{Domain, TimeSchedule, TrajectorySet};
use driftid::stats::loglog_fit;
use rand::Rng;
use std::f64::consts::PI;

/// Heat kernel on `[0, 1]` with no-flux walls, summed over mirror images.
pub fn image_heat_kernel(t: f64, x: f64, x0: f64, sigma: f64) -> f64 {
    let var = sigma * sigma * t;
    let phi = |d: f64| (-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
    (-20..=20)
        .map(|m| {
            let shift = 2.0 * m as f64;
            phi(x - x0 - shift) + phi(x + x0 - shift)
        })
        .sum()
}

/// Sup-norm error at time `t` of the zero-drift solution started from the
/// grid delta at the node nearest the middle, against the image series
/// centred on that same node.
pub fn image_kernel_error(cells: usize, t: f64, sigma: f64) -> f64 {
    let grid = SpatialGrid::new(0.0, 1.0, cells).unwrap();
    let zero = DriftSpec::new(FourierPotential::zeros(1, 1.0).unwrap(), 0.0).unwrap();
    let gen = build_generator(&zero, sigma, grid, FpBoundary::NeumannNoFlux).unwrap();
    let i0 = cells / 2;
    let x0 = grid.node(i0);
    let p0 = DensityField::delta(grid, i0).unwrap();
    let schedule = TimeSchedule::new(vec![0.0, t]).unwrap();
    let sol = solve_fp(&gen, &p0, &schedule, &StepPlan::AtLeast(1)).unwrap();
    let p = sol.densities.last().unwrap();
    p.values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - image_heat_kernel(t, grid.node(i), x0, sigma)).abs())
        .fold(0.0, f64::max)
}

/// Observed order of convergence: minus the slope of `ln error` against `ln dx`.
pub fn observed_order(cells: &[usize], errors: &[f64]) -> f64 {
    let dx: Vec<f64> = cells.iter().map(|n| 1.0 / *n as f64).collect();
    loglog_fit(&dx, errors).unwrap().slope
}

pub fn random_potential<R: Rng>(
    rng: &mut R,
    modes: usize,
    scale: f64,
    length: f64,
) -> FourierPotential {
    let cos = (0..modes)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    let sin = (0..modes)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    FourierPotential::new(cos, sin, length).unwrap()
}

/// Largest relative error between the analytic gradient of the Tikhonov
/// objective and central differences, over all coordinates.
pub fn gradient_fd_error(
    theta: &FourierPotential,
    data: &TrajectorySet,
    fidelity: &FidelityConfig,
    tikhonov: &TikhonovConfig,
    u: f64,
) -> f64 {
    let length = theta.period_length();
    let (_, grad) = tikhonov_objective(theta, data, fidelity, tikhonov, u).unwrap();
    let base = theta.theta();
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1.0);
    let mut worst = 0.0f64;
    for k in 0..base.len() {
        let h = 1e-5 * (1.0 + base[k].abs());
        let eval = |s: f64| {
            let mut t = base.clone();
            t[k] += s * h;
            let p = FourierPotential::from_theta(&t, length).unwrap();
            tikhonov_objective(&p, data, fidelity, tikhonov, u)
                .unwrap()
                .0
        };
        let fd = (eval(1.0) - eval(-1.0)) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / scale);
    }
    worst
}

pub fn unit_periodic() -> Domain {
    Domain::unit(driftid::sde::BoundaryMode::Periodic)
}
