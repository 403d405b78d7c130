use serde::{Deserialize, Serialize};

use super::solver::KernelField;
use crate::error::{Error, Result};

/// Time weight `t^α` of the norm `sup_t t^α ‖f(t)‖_{L²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    exponent: f64,
}

impl WeightedNormSpec {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent >= 0.0) || !exponent.is_finite() {
            return Err(Error::Config(format!(
                "weight exponent must be >= 0, got {exponent}"
            )));
        }
        Ok(Self { exponent })
    }

    /// `α = d/4` for `d = 1`.
    pub fn alpha_1d() -> Self {
        Self { exponent: 0.25 }
    }

    /// `β = (d + 2)/4` for `d = 1`.
    pub fn beta_1d() -> Self {
        Self { exponent: 0.75 }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

/// `max_s t_s^α ‖f_s‖_{L²}` where each slice is integrated against the
/// constant cell measure `cell_measure` (`dx` on Ω, `dx²` on Ω×Ω).
/// Times must be positive.
pub fn weighted_time_norm<'a>(
    times: &[f64],
    slices: impl IntoIterator<Item = &'a [f64]>,
    cell_measure: f64,
    spec: WeightedNormSpec,
) -> f64 {
    times
        .iter()
        .zip(slices)
        .map(|(t, f)| {
            debug_assert!(*t > 0.0);
            t.powf(spec.exponent) * (f.iter().map(|v| v * v).sum::<f64>() * cell_measure).sqrt()
        })
        .fold(0.0, f64::max)
}

impl KernelField {
    /// `sup_t t^α ‖K(t)‖_{L²(Ω×Ω)}`.
    pub fn weighted_norm(&self, spec: WeightedNormSpec) -> f64 {
        let dx = self.grid().dx();
        let slices = (0..self.times().len()).map(|s| self.slice(s));
        weighted_time_norm(self.times(), slices, dx * dx, spec)
    }

    /// `sup_t t^α ‖K(t, ·, x0)‖_{L²(Ω)}`.
    pub fn weighted_column_norm(&self, x0: usize, spec: WeightedNormSpec) -> f64 {
        let cols: Vec<Vec<f64>> = (0..self.times().len())
            .map(|s| self.column(s, x0))
            .collect();
        weighted_time_norm(
            self.times(),
            cols.iter().map(Vec::as_slice),
            self.grid().dx(),
            spec,
        )
    }

    /// `(Σ_s ‖K(t_s)‖²_{L²(Ω×Ω)})^{1/2}`.
    pub fn product_l2_norm(&self) -> f64 {
        let dx = self.grid().dx();
        (self.values().iter().map(|v| v * v).sum::<f64>() * dx * dx).sqrt()
    }
}
