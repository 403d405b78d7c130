//! Runners behind the `fp-greens`, `cone-check`, `kl-suite` and
//! `concentration` subcommands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

use super::config::ExperimentConfig;
use super::convergence::in_pool;
use crate::divergences::{
    concentration_experiment, err_tau, kl_l2_bound_check, l2_kl_base_check, product_density,
    random_density, random_kernel_stack, sample_points, trig_dictionary, ConcentrationConfig,
    ConcentrationTable, KernelStack,
};
use crate::error::Result;
use crate::fokker_planck::{
    build_generator, forward_operator, greens_function, tangential_cone_report, ConeReport,
    DensityField, DiscreteGenerator, FaceField, GreensTensor, SpatialGrid, StepPlan,
    WeightedNormSpec,
};
use crate::sde::TimeSchedule;
use crate::stats::derive_seed;

fn generator(cfg: &ExperimentConfig, cells: usize) -> Result<DiscreteGenerator> {
    let d = &cfg.model.domain;
    let grid = SpatialGrid::new(d.a(), d.b(), cells)?;
    build_generator(&cfg.model.truth, cfg.model.sigma, grid, d.mode().into())
}

/// Green's tensor of the true drift on the `greens` grid and times.
pub fn run_fp_greens(cfg: &ExperimentConfig) -> Result<GreensTensor> {
    let g = &cfg.greens;
    let gen = generator(cfg, g.cells)?;
    let schedule = TimeSchedule::uniform(g.final_time, g.steps)?;
    in_pool(|| greens_function(&gen, &schedule, &StepPlan::AtLeast(g.min_substeps)))?
}

/// Tangential cone report around the true drift in the configured direction.
pub fn run_cone_check(cfg: &ExperimentConfig) -> Result<ConeReport> {
    let c = &cfg.cone;
    let gen = generator(cfg, c.cells)?;
    let h = FaceField::from_drift(gen.grid(), &c.direction);
    let schedule = TimeSchedule::uniform(c.final_time, c.steps)?;
    let spec = WeightedNormSpec::new(c.weight_exponent)?;
    in_pool(|| tangential_cone_report(&gen, &h, &schedule, &c.scales, spec, c.min_substeps))?
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginRow {
    /// `base` (two densities), `one_step` or `two_step` (kernel stacks).
    pub kind: &'static str,
    pub instance: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrRow {
    pub instance: usize,
    pub steps: usize,
    pub direct: f64,
    pub composed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlSuiteReport {
    pub margins: Vec<MarginRow>,
    pub err: Vec<ErrRow>,
}

impl KlSuiteReport {
    pub fn min_margin(&self, kind: &str) -> f64 {
        self.margins
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_err_gap(&self) -> f64 {
        self.err
            .iter()
            .map(|r| (r.direct - r.composed).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `kl_suite.csv` and `err_tau.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("kl_suite.csv"))?;
        for r in &self.margins {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("err_tau.csv"))?;
        for r in &self.err {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Random-instance checks of the `L²`–KL inequalities and the `Err_τ` identity.
pub fn run_kl_suite(cfg: &ExperimentConfig) -> Result<KlSuiteReport> {
    let k = cfg.kl_suite;
    let d = &cfg.model.domain;
    let grid = SpatialGrid::new(d.a(), d.b(), k.cells)?;
    let grid2 = SpatialGrid::new(d.a(), d.b(), k.cells_two_step)?;
    let rng = |kind: u64, i: usize| ChaCha8Rng::seed_from_u64(derive_seed(k.seed, kind, i as u64));

    let run = || -> Result<KlSuiteReport> {
        let base = (0..k.base_instances).into_par_iter().map(|i| {
            let mut r = rng(0, i);
            let x = random_density(&grid, k.order, k.floor, &mut r)?;
            let y = random_density(&grid, k.order, k.floor, &mut r)?;
            let m = l2_kl_base_check(&x, &y)?;
            Ok(MarginRow {
                kind: "base",
                instance: i,
                lhs: m.lhs,
                rhs: m.rhs,
                margin: m.margin,
            })
        });
        let stacks = |kind: &'static str, id: u64, count: usize, g: SpatialGrid, steps: usize| {
            (0..count).into_par_iter().map(move |i| {
                let mut r = rng(id, i);
                let g0 = random_density(&g, k.order, k.floor, &mut r)?;
                let balanced = steps > 1;
                let z = random_kernel_stack(&g, steps, k.order, k.floor, balanced, &mut r)?;
                let u = random_kernel_stack(&g, steps, k.order, k.floor, balanced, &mut r)?;
                let m = kl_l2_bound_check(&z, &u, &g0, k.tau)?;
                Ok(MarginRow {
                    kind,
                    instance: i,
                    lhs: m.lhs,
                    rhs: m.rhs,
                    margin: m.margin,
                })
            })
        };
        let mut margins: Vec<MarginRow> = base.collect::<Result<_>>()?;
        margins.extend(
            stacks("one_step", 1, k.one_step_instances, grid, 1).collect::<Result<Vec<_>>>()?,
        );
        margins.extend(
            stacks("two_step", 2, k.two_step_instances, grid2, 2).collect::<Result<Vec<_>>>()?,
        );

        let err = (0..k.err_instances)
            .into_par_iter()
            .map(|i| {
                let mut r = rng(3, i);
                let (g, steps) = if i % 2 == 0 { (grid, 1) } else { (grid2, 2) };
                let g0 = random_density(&g, k.order, k.floor, &mut r)?;
                let y = random_kernel_stack(&g, steps, k.order, k.floor, false, &mut r)?;
                let gdag = random_kernel_stack(&g, steps, k.order, k.floor, false, &mut r)?;
                let points = sample_points(&product_density(&g0, &gdag)?, k.err_samples, &mut r)?;
                let e = err_tau(&y, &gdag, &points, &g0, k.tau)?;
                Ok(ErrRow {
                    instance: i,
                    steps,
                    direct: e.direct,
                    composed: e.composed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KlSuiteReport { margins, err })
    };
    in_pool(run)?
}

/// Concentration sweep on `g⁰ · F(μ†)_1`, with `g⁰` the initial law on the grid.
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<ConcentrationTable> {
    let c = &cfg.concentration;
    let gen = generator(cfg, c.cells)?;
    let grid = *gen.grid();
    let dt = cfg.schedule.final_time / cfg.schedule.steps as f64;
    let f = forward_operator(
        &gen,
        &TimeSchedule::new(vec![0.0, dt])?,
        &StepPlan::AtLeast(1),
    )?;
    let law = cfg.initial_law()?;
    let g0 = DensityField::from_fn(grid, |x| law.density(x))?.normalized()?;
    let gp = product_density(&g0, &KernelStack::from_forward(&f)?)?;
    let dictionary = trig_dictionary(&grid, 2, c.dictionary_order);
    let run_cfg = ConcentrationConfig {
        n_list: c.n_list.clone(),
        reps: c.reps,
        rho: c.rho.clone(),
        seed: c.seed,
    };
    in_pool(|| concentration_experiment(&gp, &dictionary, &run_cfg))?
}
