//! Empirical Gaussian envelope `P(t, x, x0) <= Ĉ t^{-1/2} exp(-C |x - x0|²/t)`.

use serde::Serialize;

use super::grid::{FpBoundary, SpatialGrid};
use super::solver::GreensTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeConfig {
    /// Decay constants `C` to try.
    pub candidates: Vec<f64>,
    /// A pair is feasible when its least `Ĉ` does not exceed this value.
    pub ceiling: f64,
    /// Points where `P` is below `floor` times its maximum are skipped: far
    /// tails of the discrete kernel are set by the time-stepping error,
    /// which decays geometrically rather than like a Gaussian.
    pub floor: f64,
}

impl EnvelopeConfig {
    /// `C = f/(2σ²)` for `f` from 1 down to 1/8, and a ceiling of ten times
    /// the larger of the free-space constant `1/√(2πσ²)` and the long-time
    /// value `√T / |Ω|`.
    pub fn for_tensor(g: &GreensTensor) -> Self {
        let sigma2 = g.generator().sigma().powi(2);
        let candidates = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.25, 0.125]
            .iter()
            .map(|f| f / (2.0 * sigma2))
            .collect();
        let t_max = g.times().last().copied().unwrap_or(0.0);
        let free = 1.0 / (2.0 * std::f64::consts::PI * sigma2).sqrt();
        Self {
            candidates,
            ceiling: 10.0 * free.max(t_max.sqrt() / g.grid().length()),
            floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub c: f64,
    /// Least `Ĉ` valid at every grid point for this `C`.
    pub c_hat: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub rows: Vec<EnvelopeRow>,
    pub feasible: bool,
    /// Feasible pair with the largest `C`.
    pub best: Option<EnvelopeRow>,
    /// `max P(t, x0, x0) √t`, the bound on the diagonal where the exponential is 1.
    pub diagonal_c_hat: f64,
}

/// Finds, for each candidate `C`, the least `Ĉ` with
/// `P(t, x, x0) <= Ĉ t^{-1/2} exp(-C d(x, x0)²/t)` on all grid points,
/// where `d` is the distance on the domain (around the circle when periodic).
pub fn validate_gaussian_envelope(
    g: &GreensTensor,
    cfg: &EnvelopeConfig,
) -> Result<EnvelopeReport> {
    if g.times().iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain(
            "envelope needs strictly positive times".into(),
        ));
    }
    if cfg.candidates.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::Config("envelope constants must be positive".into()));
    }
    let grid = *g.grid();
    let bc = g.generator().boundary();
    let nodes = grid.nodes();
    let n = grid.len();
    if !(cfg.floor >= 0.0 && cfg.floor < 1.0) {
        return Err(Error::Config(format!(
            "envelope floor must lie in [0, 1), got {}",
            cfg.floor
        )));
    }
    let threshold = cfg.floor * g.kernels().values().iter().copied().fold(0.0, f64::max);
    let mut log_bounds = vec![f64::NEG_INFINITY; cfg.candidates.len()];
    let mut diagonal = 0.0f64;
    for (s, t) in g.times().iter().enumerate() {
        let half_ln_t = 0.5 * t.ln();
        for x in 0..n {
            for x0 in 0..n {
                let p = g.get(s, x, x0);
                if x == x0 {
                    diagonal = diagonal.max(p * t.sqrt());
                }
                if p <= threshold || p <= 0.0 {
                    continue;
                }
                let d2 = grid.distance(nodes[x], nodes[x0], bc).powi(2) / t;
                let base = p.ln() + half_ln_t;
                for (lb, c) in log_bounds.iter_mut().zip(&cfg.candidates) {
                    *lb = lb.max(base + c * d2);
                }
            }
        }
    }
    let rows: Vec<EnvelopeRow> = cfg
        .candidates
        .iter()
        .zip(&log_bounds)
        .map(|(c, lb)| {
            let c_hat = lb.exp();
            EnvelopeRow {
                c: *c,
                c_hat,
                feasible: c_hat <= cfg.ceiling,
            }
        })
        .collect();
    let best = rows
        .iter()
        .filter(|r| r.feasible)
        .copied()
        .max_by(|a, b| a.c.total_cmp(&b.c));
    Ok(EnvelopeReport {
        feasible: best.is_some(),
        rows,
        best,
        diagonal_c_hat: diagonal,
    })
}

/// `∫_Ω exp(-C d(x, x0)²/t) dx` by the cell-centred rule.
pub fn gaussian_mass(grid: &SpatialGrid, bc: FpBoundary, c: f64, t: f64, x0: f64) -> f64 {
    grid.nodes()
        .iter()
        .map(|x| (-c * grid.distance(*x, x0, bc).powi(2) / t).exp())
        .sum::<f64>()
        * grid.dx()
}
