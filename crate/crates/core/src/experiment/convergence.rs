//! Convergence study: error of the MAP estimate against the number of particles.

use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::map_estimator::{infer_map, l2_error};
use crate::sde::simulate_trajectories;
use crate::stats::{derive_seed, loglog_fit, median, sample_variance, LineFit};

/// Environment variable capping the worker threads of a sweep.
pub const THREADS_ENV: &str = "DRIFTID_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    /// Empty when the run failed with an error.
    pub l2_error: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutcome {
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
    pub rate: LineFit,
}

/// Least-squares fit of `ln error` against `ln n`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some((n, e)) = points.iter().find(|(n, e)| !(*e > 0.0) || !(*n > 0.0)) {
        return Err(Error::Domain(format!(
            "rate fit needs positive values, got ({n}, {e})"
        )));
    }
    let (ns, es): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    loglog_fit(&ns, &es)
}

/// A pool honouring [`THREADS_ENV`], or the global pool when unset.
pub fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let threads: usize = v.trim().parse().ok().filter(|t| *t > 0).ok_or_else(|| {
                Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                ))
            })?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(Some(pool))
        }
        Err(_) => Ok(None),
    }
}

pub(crate) fn in_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(match thread_pool()? {
        Some(pool) => pool.install(f),
        None => f(),
    })
}

fn run_cell(cfg: &ExperimentConfig, n: usize, rep: usize) -> Result<ExperimentRecord> {
    let seed = derive_seed(cfg.sweep.seed, n as u64, rep as u64);
    let start = Instant::now();
    let schedule = cfg.time_schedule()?;
    let law = cfg.initial_law()?;
    let model = cfg.model_spec();
    let data = simulate_trajectories(
        &cfg.model.truth,
        cfg.model.sigma,
        &schedule,
        &law,
        &cfg.model.domain,
        n,
        seed,
    )?;
    let outcome = infer_map(&data, &model, &cfg.tikhonov()?, &cfg.optimizer()).and_then(|r| {
        Ok((
            l2_error(&r.theta_hat, cfg.model.truth.potential())?,
            r.iterations,
            r.converged,
        ))
    });
    let wall_time = start.elapsed().as_secs_f64();
    Ok(match outcome {
        Ok((err, iterations, converged)) => ExperimentRecord {
            n,
            rep,
            seed,
            l2_error: Some(err),
            iterations,
            converged,
            wall_time,
        },
        Err(e) if e.is_config() => return Err(e),
        Err(_) => ExperimentRecord {
            n,
            rep,
            seed,
            l2_error: None,
            iterations: 0,
            converged: false,
            wall_time,
        },
    })
}

/// Summaries over converged runs; failures are counted, not averaged.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let cell: Vec<&ExperimentRecord> = records.iter().filter(|r| r.n == n).collect();
            let ok: Vec<f64> = cell
                .iter()
                .filter(|r| r.converged)
                .filter_map(|r| r.l2_error)
                .collect();
            let failures = cell.len() - ok.len();
            let (median, mean) = if ok.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (median(&ok), ok.iter().sum::<f64>() / ok.len() as f64)
            };
            SummaryRow {
                n,
                median,
                mean,
                variance: sample_variance(&ok),
                failures,
            }
        })
        .collect()
}

/// Runs every `(n, rep)` cell (in parallel, deterministic given the master
/// seed) and fits the rate on the per-`n` medians.
pub fn run_convergence_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceOutcome> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .sweep
        .n_values
        .iter()
        .flat_map(|n| (0..cfg.sweep.reps).map(move |r| (*n, r)))
        .collect();
    let records = in_pool(|| {
        cells
            .par_iter()
            .map(|&(n, rep)| run_cell(cfg, n, rep))
            .collect::<Result<Vec<_>>>()
    })??;
    let summary = summarize(&records);
    let points: Vec<(f64, f64)> = summary
        .iter()
        .filter(|s| s.median.is_finite())
        .map(|s| (s.n as f64, s.median))
        .collect();
    let rate = fit_rate(&points)?;
    Ok(ConvergenceOutcome {
        records,
        summary,
        rate,
    })
}

impl ConvergenceOutcome {
    /// Writes `records.csv`, `summary.csv` and `rate.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("records.csv"))?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        for s in &self.summary {
            w.serialize(s)?;
        }
        w.flush()?;
        std::fs::write(
            dir.join("rate.json"),
            serde_json::to_string_pretty(&self.rate)?,
        )?;
        Ok(())
    }
}
