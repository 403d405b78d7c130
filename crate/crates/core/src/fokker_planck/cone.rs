//! Empirical check of the weak and strong tangential cone conditions.

use serde::Serialize;
use std::io::Write;

use super::generator::{DiscreteGenerator, FaceField};
use super::linearized::linearized_tensor;
use super::norms::WeightedNormSpec;
use super::solver::{forward_operator, greens_function, KernelField, StepPlan};
use crate::error::{Error, Result};
use crate::sde::TimeSchedule;
use crate::stats::loglog_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeRow {
    pub eps: f64,
    /// `‖P(μ+εh) - P(μ) - ε P′(μ)[h]‖` in the weighted norm.
    pub lhs: f64,
    /// `‖εh‖_∞ ‖P(μ+εh) - P(μ)‖` in the weighted norm.
    pub rhs_weak: f64,
    pub ratio_weak: f64,
    /// `‖F(μ+εh) - F(μ)‖` in `L²(Ω×Ω)^M`.
    pub rhs_strong: f64,
    /// Strong remainder over `rhs_strong`.
    pub ratio_strong: f64,
    /// `‖F(μ+εh) - F(μ) - ε F′(μ)[h]‖` in `L²(Ω×Ω)^M`.
    pub lhs_strong: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    pub rows: Vec<ConeRow>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl ConeReport {
    /// Fitted exponent `q` of `lhs ~ ε^q`.
    pub fn remainder_exponent(&self) -> Result<f64> {
        let (eps, lhs): (Vec<f64>, Vec<f64>) = self.rows.iter().map(|r| (r.eps, r.lhs)).unzip();
        Ok(loglog_fit(&eps, &lhs)?.slope)
    }

    /// `max / min` of `ratio_weak` over the rows.
    pub fn ratio_weak_variation(&self) -> f64 {
        let max = self
            .rows
            .iter()
            .map(|r| r.ratio_weak)
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self
            .rows
            .iter()
            .map(|r| r.ratio_weak)
            .fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Writes `eps,lhs,rhs_weak,ratio_weak,rhs_strong,ratio_strong`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "eps",
            "lhs",
            "rhs_weak",
            "ratio_weak",
            "rhs_strong",
            "ratio_strong",
        ])?;
        for r in &self.rows {
            w.serialize((
                r.eps,
                r.lhs,
                r.rhs_weak,
                r.ratio_weak,
                r.rhs_strong,
                r.ratio_strong,
            ))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stacks the `M` components of a forward operator as a kernel field.
fn forward_field(
    gen: &DiscreteGenerator,
    schedule: &TimeSchedule,
    plan: &StepPlan,
    direction: Option<&FaceField>,
) -> Result<KernelField> {
    let f = forward_operator(gen, schedule, plan)?;
    let (parts, index) = f.parts();
    let per_part = parts
        .iter()
        .map(|g| match direction {
            Some(h) => linearized_tensor(g, h),
            None => Ok(g.kernels().clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = index
        .iter()
        .flat_map(|i| per_part[*i].slice(0).iter().copied())
        .collect();
    KernelField::new(*f.grid(), schedule.times()[1..].to_vec(), values)
}

/// For each `ε` in `scales`, compares the remainder of the linearization of
/// `P` (weighted by `t^α`) and of `F` with the weak and strong right-hand
/// sides. All solves use identical step counts.
pub fn tangential_cone_report(
    base: &DiscreteGenerator,
    h: &FaceField,
    schedule: &TimeSchedule,
    scales: &[f64],
    spec: WeightedNormSpec,
    min_steps: usize,
) -> Result<ConeReport> {
    if scales.is_empty()
        || scales.iter().any(|e| !(*e > 0.0))
        || scales.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::Config(
            "scales must be positive and strictly decreasing".into(),
        ));
    }
    let grid = *base.grid();
    let (sigma, bc) = (base.sigma(), base.boundary());
    let perturbed = scales
        .iter()
        .map(|eps| {
            DiscreteGenerator::from_face_drift(base.face_drift().axpy(*eps, h), sigma, grid, bc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<&DiscreteGenerator> = perturbed.iter().collect();
    all.push(base);
    let plan = StepPlan::common(&all, schedule, min_steps)?;

    let p0 = greens_function(base, schedule, &plan)?;
    let dp = linearized_tensor(&p0, h)?;
    let f0 = forward_field(base, schedule, &plan, None)?;
    let df = forward_field(base, schedule, &plan, Some(h))?;
    let h_sup = h.sup_norm();

    let mut rows = Vec::with_capacity(scales.len());
    for (eps, gen) in scales.iter().zip(&perturbed) {
        let pe = greens_function(gen, schedule, &plan)?;
        let diff = pe.kernels().axpy(-1.0, p0.kernels())?;
        let lhs = diff.axpy(-eps, &dp)?.weighted_norm(spec);
        let rhs_weak = eps * h_sup * diff.weighted_norm(spec);

        let fe = forward_field(gen, schedule, &plan, None)?;
        let fdiff = fe.axpy(-1.0, &f0)?;
        let lhs_strong = fdiff.axpy(-eps, &df)?.product_l2_norm();
        let rhs_strong = fdiff.product_l2_norm();
        rows.push(ConeRow {
            eps: *eps,
            lhs,
            rhs_weak,
            ratio_weak: ratio(lhs, rhs_weak),
            rhs_strong,
            ratio_strong: ratio(lhs_strong, rhs_strong),
            lhs_strong,
        });
    }
    Ok(ConeReport { rows })
}
