//! Crank–Nicolson time stepping, Green's tensors and the forward operator.

use rayon::prelude::*;
use std::io::Write;

use super::generator::DiscreteGenerator;
use super::grid::{DensityField, SpatialGrid};
use super::tridiag::{Tridiagonal, TridiagonalFactor};
use crate::error::{Error, Result};
use crate::sde::TimeSchedule;

/// Per-step mass drift above which a solve is reported as broken down.
const MASS_BREAKDOWN_TOL: f64 = 1e-9;
/// Relative size of negative values still attributed to roundoff.
const NEGATIVE_TOL: f64 = 1e-12;

/// How many Crank–Nicolson substeps to take on each interval `(t_{s-1}, t_s]`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepPlan {
    /// At least this many, raised where needed so that every step keeps
    /// the solution nonnegative.
    AtLeast(usize),
    /// Exactly these counts, one per interval.
    Exactly(Vec<usize>),
}

impl StepPlan {
    /// Resolves the plan against a generator and time grid.
    pub fn resolve(&self, gen: &DiscreteGenerator, schedule: &TimeSchedule) -> Result<Vec<usize>> {
        match self {
            StepPlan::AtLeast(min) => {
                let bound = gen.max_diagonal();
                Ok(schedule
                    .increments()
                    .map(|dt| {
                        let needed = (0.5 * dt * bound * (1.0 + 1e-12)).ceil() as usize;
                        needed.max(*min).max(1)
                    })
                    .collect())
            }
            StepPlan::Exactly(steps) => {
                if steps.len() != schedule.steps() {
                    return Err(Error::Dimension(format!(
                        "{} step counts for {} intervals",
                        steps.len(),
                        schedule.steps()
                    )));
                }
                if steps.contains(&0) {
                    return Err(Error::Config(
                        "every interval needs at least one step".into(),
                    ));
                }
                Ok(steps.clone())
            }
        }
    }

    /// Elementwise maximum of the resolved plans over several generators, so
    /// that all of them can be stepped identically.
    pub fn common(
        gens: &[&DiscreteGenerator],
        schedule: &TimeSchedule,
        min: usize,
    ) -> Result<StepPlan> {
        let mut steps = vec![min.max(1); schedule.steps()];
        for g in gens {
            for (s, k) in steps
                .iter_mut()
                .zip(StepPlan::AtLeast(min).resolve(g, schedule)?)
            {
                *s = (*s).max(k);
            }
        }
        Ok(StepPlan::Exactly(steps))
    }
}

/// One Crank–Nicolson step `(I + dt/2 L) p⁺ = (I - dt/2 L) p`.
#[derive(Debug, Clone)]
pub(crate) struct CnStep {
    explicit: Tridiagonal,
    implicit: TridiagonalFactor,
    pub(crate) dt: f64,
}

impl CnStep {
    pub(crate) fn new(gen: &DiscreteGenerator, dt: f64) -> Result<Self> {
        let m = gen.matrix();
        Ok(Self {
            explicit: m.shifted_identity(-0.5 * dt),
            implicit: m.shifted_identity(0.5 * dt).factor()?,
            dt,
        })
    }

    /// `next = (I + dt/2 L)⁻¹ (I - dt/2 L) p`.
    pub(crate) fn advance(&self, p: &[f64], next: &mut [f64]) {
        self.explicit.matvec(p, next);
        self.implicit.solve_in_place(next);
    }

    /// `out = (I - dt/2 L) p`.
    pub(crate) fn explicit_part(&self, p: &[f64], out: &mut [f64]) {
        self.explicit.matvec(p, out);
    }

    pub(crate) fn solve(&self, rhs: &mut [f64]) {
        self.implicit.solve_in_place(rhs);
    }
}

/// Step operators for every interval of a schedule, shared between intervals
/// of equal length.
pub(crate) fn build_steps(
    gen: &DiscreteGenerator,
    schedule: &TimeSchedule,
    substeps: &[usize],
) -> Result<Vec<CnStep>> {
    let mut out: Vec<CnStep> = Vec::with_capacity(substeps.len());
    for (s, (dt_interval, k)) in schedule.increments().zip(substeps).enumerate() {
        let dt = dt_interval / *k as f64;
        let reuse = out.iter().find(|c| c.dt == dt).cloned();
        let step = match reuse {
            Some(c) => c,
            None => CnStep::new(gen, dt)
                .map_err(|e| Error::Numerical(format!("interval {s}, dt = {dt}: {e}")))?,
        };
        out.push(step);
    }
    Ok(out)
}

/// Densities at the positive times of a schedule.
#[derive(Debug, Clone)]
pub struct FpSolution {
    pub times: Vec<f64>,
    pub densities: Vec<DensityField>,
    pub substeps: Vec<usize>,
    /// Largest `|mass(p⁺) - mass(p)|` over all steps.
    pub max_step_mass_drift: f64,
}

fn check_initial(gen: &DiscreteGenerator, p0: &DensityField) -> Result<()> {
    if p0.grid() != gen.grid() {
        return Err(Error::Dimension(
            "initial density lives on a different grid".into(),
        ));
    }
    let mass = p0.mass();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "initial density must have unit mass, got {mass}"
        )));
    }
    Ok(())
}

/// Clears roundoff-level negative values; anything larger is a breakdown.
fn clip_roundoff(values: &mut [f64]) -> Result<()> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_TOL * scale {
                return Err(Error::Numerical(format!(
                    "density dropped to {v:e}; the time step is too large"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// Marches `p0` through all intervals, calling `record(s, p)` at each `t_s`, `s >= 1`.
fn march(
    p0: &[f64],
    steps: &[CnStep],
    substeps: &[usize],
    dx: f64,
    mut record: impl FnMut(usize, &[f64]),
) -> Result<f64> {
    let mut p = p0.to_vec();
    let mut next = vec![0.0; p.len()];
    let mut mass = p.iter().sum::<f64>() * dx;
    let mut worst = 0.0f64;
    for (s, (step, k)) in steps.iter().zip(substeps).enumerate() {
        for j in 0..*k {
            step.advance(&p, &mut next);
            std::mem::swap(&mut p, &mut next);
            let m = p.iter().sum::<f64>() * dx;
            let drift = (m - mass).abs();
            if !drift.is_finite() || drift > MASS_BREAKDOWN_TOL {
                return Err(Error::Numerical(format!(
                    "mass changed by {drift:e} in substep {j} of interval {s} (dt = {})",
                    step.dt
                )));
            }
            worst = worst.max(drift);
            mass = m;
        }
        record(s + 1, &p);
    }
    Ok(worst)
}

/// Solves `∂_t p + L p = 0` from `p0` and returns `p(t_s)` for `s = 1..=M`.
pub fn solve_fp(
    gen: &DiscreteGenerator,
    p0: &DensityField,
    schedule: &TimeSchedule,
    plan: &StepPlan,
) -> Result<FpSolution> {
    check_initial(gen, p0)?;
    let substeps = plan.resolve(gen, schedule)?;
    let steps = build_steps(gen, schedule, &substeps)?;
    let grid = *gen.grid();
    let mut densities = Vec::with_capacity(schedule.steps());
    let mut raw = Vec::with_capacity(schedule.steps());
    let worst = march(p0.values(), &steps, &substeps, grid.dx(), |_, p| {
        raw.push(p.to_vec())
    })?;
    for mut values in raw {
        clip_roundoff(&mut values)?;
        densities.push(DensityField::new(grid, values)?);
    }
    Ok(FpSolution {
        times: schedule.times()[1..].to_vec(),
        densities,
        substeps,
        max_step_mass_drift: worst,
    })
}

/// A time-indexed family of kernels `K(t_s, x, x0)` on a grid, stored as
/// `values[s][x][x0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    grid: SpatialGrid,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl KernelField {
    pub fn new(grid: SpatialGrid, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if values.len() != times.len() * n * n {
            return Err(Error::Dimension(format!(
                "{} values for {} times on a {n}-cell grid",
                values.len(),
                times.len()
            )));
        }
        Ok(Self {
            grid,
            times,
            values,
        })
    }

    pub fn zeros(grid: SpatialGrid, times: Vec<f64>) -> Self {
        let len = times.len() * grid.len() * grid.len();
        Self {
            grid,
            times,
            values: vec![0.0; len],
        }
    }

    /// Assembles a field from per-`x0` columns laid out as `[s][x]`.
    pub(crate) fn from_columns(grid: SpatialGrid, times: Vec<f64>, columns: &[Vec<f64>]) -> Self {
        let n = grid.len();
        let mut field = Self::zeros(grid, times);
        for (x0, col) in columns.iter().enumerate() {
            for (s, chunk) in col.chunks(n).enumerate() {
                for (x, v) in chunk.iter().enumerate() {
                    field.values[(s * n + x) * n + x0] = *v;
                }
            }
        }
        field
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize, x: usize, x0: usize) -> f64 {
        let n = self.grid.len();
        self.values[(s * n + x) * n + x0]
    }

    /// The `N × N` kernel at time index `s`, row-major in `x`.
    pub fn slice(&self, s: usize) -> &[f64] {
        let nn = self.grid.len() * self.grid.len();
        &self.values[s * nn..(s + 1) * nn]
    }

    /// `K(t_s, ·, x0)`.
    pub fn column(&self, s: usize, x0: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|x| self.get(s, x, x0)).collect()
    }

    /// `∫ K(t_s, x, x0) dx`.
    pub fn mass(&self, s: usize, x0: usize) -> f64 {
        (0..self.grid.len())
            .map(|x| self.get(s, x, x0))
            .sum::<f64>()
            * self.grid.dx()
    }

    /// `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &KernelField) -> Result<KernelField> {
        if self.grid != other.grid || self.times != other.times {
            return Err(Error::Dimension(
                "kernel fields on different grids or times".into(),
            ));
        }
        Ok(KernelField {
            grid: self.grid,
            times: self.times.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + scale * b)
                .collect(),
        })
    }

    pub fn scaled(&self, scale: f64) -> KernelField {
        KernelField {
            grid: self.grid,
            times: self.times.clone(),
            values: self.values.iter().map(|v| scale * v).collect(),
        }
    }

    /// Writes `t,x,x0,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "x0", "value"])?;
        let nodes = self.grid.nodes();
        for (s, t) in self.times.iter().enumerate() {
            for (x, xv) in nodes.iter().enumerate() {
                for (x0, x0v) in nodes.iter().enumerate() {
                    w.serialize((t, xv, x0v, self.get(s, x, x0)))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Discrete Green's function `P(μ)(t_s, x, x0)`, together with the generator
/// and step counts that produced it.
#[derive(Debug, Clone)]
pub struct GreensTensor {
    generator: DiscreteGenerator,
    schedule: TimeSchedule,
    substeps: Vec<usize>,
    kernels: KernelField,
    max_step_mass_drift: f64,
}

impl GreensTensor {
    pub fn generator(&self) -> &DiscreteGenerator {
        &self.generator
    }

    pub fn schedule(&self) -> &TimeSchedule {
        &self.schedule
    }

    pub fn substeps(&self) -> &[usize] {
        &self.substeps
    }

    pub fn kernels(&self) -> &KernelField {
        &self.kernels
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.kernels.grid()
    }

    /// Positive times `t_1..t_S`.
    pub fn times(&self) -> &[f64] {
        self.kernels.times()
    }

    pub fn get(&self, s: usize, x: usize, x0: usize) -> f64 {
        self.kernels.get(s, x, x0)
    }

    pub fn max_step_mass_drift(&self) -> f64 {
        self.max_step_mass_drift
    }

    /// Largest `|∫ P(t, x, x0) dx - 1|` over all `(t, x0)`.
    pub fn max_mass_error(&self) -> f64 {
        let n = self.grid().len();
        (0..self.times().len())
            .flat_map(|s| (0..n).map(move |x0| (s, x0)))
            .map(|(s, x0)| (self.kernels.mass(s, x0) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.kernels.write_csv(writer)
    }
}

/// Solves from the discrete delta at every node (in parallel) and assembles
/// `P(μ)(t_s, x, x0)` for the positive times of `schedule`.
pub fn greens_function(
    gen: &DiscreteGenerator,
    schedule: &TimeSchedule,
    plan: &StepPlan,
) -> Result<GreensTensor> {
    let grid = *gen.grid();
    let substeps = plan.resolve(gen, schedule)?;
    let steps = build_steps(gen, schedule, &substeps)?;
    let n = grid.len();
    let s_count = schedule.steps();
    let columns: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|x0| {
            let delta = DensityField::delta(grid, x0)?;
            let mut col = vec![0.0; s_count * n];
            let worst = march(delta.values(), &steps, &substeps, grid.dx(), |s, p| {
                col[(s - 1) * n..s * n].copy_from_slice(p);
            })?;
            clip_roundoff(&mut col)?;
            Ok((col, worst))
        })
        .collect::<Result<_>>()?;
    let max_step_mass_drift = columns.iter().map(|c| c.1).fold(0.0, f64::max);
    let cols: Vec<Vec<f64>> = columns.into_iter().map(|c| c.0).collect();
    let kernels = KernelField::from_columns(grid, schedule.times()[1..].to_vec(), &cols);
    Ok(GreensTensor {
        generator: gen.clone(),
        schedule: schedule.clone(),
        substeps,
        kernels,
        max_step_mass_drift,
    })
}

/// `F(μ)_i = P(μ)(t_i - t_{i-1})`: one Markov kernel per schedule interval.
/// Intervals of equal length share a single solve.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    unique: Vec<GreensTensor>,
    index: Vec<usize>,
}

impl ForwardOperator {
    /// Number of components `M`.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Kernel of interval `i` as an `N × N` row-major slice `[x][x0]`.
    pub fn kernel(&self, i: usize) -> &[f64] {
        self.unique[self.index[i]].kernels().slice(0)
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.unique[0].grid()
    }

    /// Distinct single-interval Green's tensors and the map from interval to tensor.
    pub fn parts(&self) -> (&[GreensTensor], &[usize]) {
        (&self.unique, &self.index)
    }
}

/// Builds `F(μ)` for `schedule`. With [`StepPlan::Exactly`], interval `i`
/// uses the `i`-th count (intervals sharing a length use the first one).
pub fn forward_operator(
    gen: &DiscreteGenerator,
    schedule: &TimeSchedule,
    plan: &StepPlan,
) -> Result<ForwardOperator> {
    let increments: Vec<f64> = schedule.increments().collect();
    let counts = plan.resolve(gen, schedule)?;
    let mut lengths: Vec<(f64, usize)> = Vec::new();
    let mut index = Vec::with_capacity(increments.len());
    for (i, dt) in increments.iter().enumerate() {
        match lengths
            .iter()
            .position(|(l, _)| (l - dt).abs() <= 1e-12 * dt)
        {
            Some(k) => index.push(k),
            None => {
                index.push(lengths.len());
                lengths.push((*dt, counts[i]));
            }
        }
    }
    let unique = lengths
        .iter()
        .map(|(dt, k)| {
            greens_function(
                gen,
                &TimeSchedule::new(vec![0.0, *dt])?,
                &StepPlan::Exactly(vec![*k]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForwardOperator { unique, index })
}
