//! Monte Carlo check of the `1/√n` concentration of `sup_y |∫ y d(Gⁿ - g^π)|`
//! over a finite dictionary of test functions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use super::product::ProductDensity;
use crate::error::{Error, Result};
use crate::fokker_planck::SpatialGrid;
use crate::stats::{derive_seed, median};

/// Tensor products of `1, cos(kωx), sin(kωx)` for `k <= order` in each of
/// `dims` coordinates, sampled at cell centres (last coordinate fastest).
/// Every function is bounded by one.
pub fn trig_dictionary(grid: &SpatialGrid, dims: usize, order: usize) -> Vec<Vec<f64>> {
    let n = grid.len();
    let omega = 2.0 * PI / grid.length();
    let per_axis: Vec<Vec<f64>> = (0..=2 * order)
        .map(|b| {
            grid.nodes()
                .iter()
                .map(|x| {
                    let k = ((b + 1) / 2) as f64;
                    match b {
                        0 => 1.0,
                        b if b % 2 == 1 => (omega * k * (x - grid.a())).cos(),
                        _ => (omega * k * (x - grid.a())).sin(),
                    }
                })
                .collect()
        })
        .collect();
    let width = 2 * order + 1;
    (0..width.pow(dims as u32))
        .map(|t| {
            let factors: Vec<usize> = (0..dims)
                .map(|d| (t / width.pow(d as u32)) % width)
                .collect();
            (0..n.pow(dims as u32))
                .map(|cell| {
                    (0..dims)
                        .map(|d| per_axis[factors[d]][(cell / n.pow((dims - 1 - d) as u32)) % n])
                        .product()
                })
                .collect()
        })
        .collect()
}

/// Draws `n` cell indices of the tensor grid with probabilities `g^π dx^{M+1}`.
pub fn sample_cells<R: Rng + ?Sized>(
    gp: &ProductDensity,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(gp.values())
        .map_err(|e| Error::Domain(format!("cannot sample density: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Draws `n` points of `Ω^{M+1}` from the piecewise-constant density `g^π`.
pub fn sample_points<R: Rng + ?Sized>(
    gp: &ProductDensity,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let grid = gp.grid();
    let dims = gp.steps() + 1;
    let cells = sample_cells(gp, n, rng)?;
    Ok(cells
        .into_iter()
        .map(|c| {
            (0..dims)
                .map(|d| {
                    let i = (c / grid.len().pow((dims - 1 - d) as u32)) % grid.len();
                    grid.face(i) + rng.random::<f64>() * grid.dx()
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub n_list: Vec<usize>,
    pub reps: usize,
    /// Thresholds `ρ` of the tail events `D >= ρ/√n`.
    pub rho: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub rep: usize,
    pub sup_discrepancy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub rho: f64,
    pub n: usize,
    pub tail_frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationTable {
    pub rows: Vec<ConcentrationRow>,
    pub tails: Vec<TailRow>,
}

impl ConcentrationTable {
    /// Median of `√n D` over the repetitions at sample size `n`.
    pub fn median_scaled(&self, n: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| (n as f64).sqrt() * r.sup_discrepancy)
            .collect();
        (!v.is_empty()).then(|| median(&v))
    }

    /// Writes `n,rep,sup_discrepancy`.
    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "rep", "sup_discrepancy"])?;
        for r in &self.rows {
            w.serialize((r.n, r.rep, r.sup_discrepancy))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `rho,n,tail_frequency`.
    pub fn write_tails_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rho", "n", "tail_frequency"])?;
        for r in &self.tails {
            w.serialize((r.rho, r.n, r.tail_frequency))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// For every `(n, rep)`: samples `Gⁿ` from `g^π` and records
/// `D = max_y |(1/n) Σ_j y(q_j) - ∫ y g^π dx|` over the dictionary.
pub fn concentration_experiment(
    gp: &ProductDensity,
    dictionary: &[Vec<f64>],
    cfg: &ConcentrationConfig,
) -> Result<ConcentrationTable> {
    if dictionary.is_empty() || cfg.n_list.is_empty() || cfg.reps == 0 {
        return Err(Error::Config(
            "need a dictionary, sample sizes and repetitions".into(),
        ));
    }
    if dictionary.iter().any(|y| y.len() != gp.values().len()) {
        return Err(Error::Dimension(
            "dictionary functions do not match the tensor grid".into(),
        ));
    }
    if cfg.n_list.contains(&0) {
        return Err(Error::Config("sample sizes must be positive".into()));
    }
    let w = gp.cell_measure();
    let expectations: Vec<f64> = dictionary
        .iter()
        .map(|y| y.iter().zip(gp.values()).map(|(a, b)| a * b).sum::<f64>() * w)
        .collect();
    let cells: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|n| (0..cfg.reps).map(move |r| (*n, r)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(n, rep)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, n as u64, rep as u64));
            let sample = sample_cells(gp, n, &mut rng)?;
            let d = dictionary
                .iter()
                .zip(&expectations)
                .map(|(y, e)| (sample.iter().map(|c| y[*c]).sum::<f64>() / n as f64 - e).abs())
                .fold(0.0, f64::max);
            Ok(ConcentrationRow {
                n,
                rep,
                sup_discrepancy: d,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tails = Vec::with_capacity(cfg.rho.len() * cfg.n_list.len());
    for rho in &cfg.rho {
        for n in &cfg.n_list {
            let threshold = rho / (*n as f64).sqrt();
            let hits = rows
                .iter()
                .filter(|r| r.n == *n && r.sup_discrepancy >= threshold)
                .count();
            tails.push(TailRow {
                rho: *rho,
                n: *n,
                tail_frequency: hits as f64 / cfg.reps as f64,
            });
        }
    }
    Ok(ConcentrationTable { rows, tails })
}

#[cfg(test)]
mod tests {
    use super::super::product::{product_density, KernelStack};
    use super::*;
    use crate::fokker_planck::DensityField;

    fn uniform_product(n: usize) -> ProductDensity {
        let g = SpatialGrid::new(0.0, 1.0, n).unwrap();
        let k = KernelStack::new(g, vec![vec![1.0; n * n]]).unwrap();
        product_density(&DensityField::uniform(g), &k).unwrap()
    }

    #[test]
    fn constant_function_has_no_discrepancy() {
        let gp = uniform_product(16);
        let one = vec![vec![1.0; 256]];
        let cfg = ConcentrationConfig {
            n_list: vec![10, 100],
            reps: 5,
            rho: vec![0.1],
            seed: 3,
        };
        let t = concentration_experiment(&gp, &one, &cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.sup_discrepancy < 1e-12));
        assert!(t.tails.iter().all(|r| r.tail_frequency == 0.0));
    }

    #[test]
    fn dictionary_shape_and_tails_monotone() {
        let g = SpatialGrid::new(0.0, 1.0, 16).unwrap();
        let dict = trig_dictionary(&g, 2, 1);
        assert_eq!(dict.len(), 9);
        assert!(dict
            .iter()
            .all(|y| y.iter().all(|v| v.abs() <= 1.0 + 1e-15)));
        let gp = uniform_product(16);
        let cfg = ConcentrationConfig {
            n_list: vec![50],
            reps: 40,
            rho: vec![0.1, 0.5, 1.0, 2.0],
            seed: 9,
        };
        let t = concentration_experiment(&gp, &dict, &cfg).unwrap();
        for w in t.tails.windows(2) {
            assert!(w[1].tail_frequency <= w[0].tail_frequency);
        }
        let again = concentration_experiment(&gp, &dict, &cfg).unwrap();
        assert_eq!(t, again);
    }
}
