//! Directional derivative `P′(μ)[h]` of the discrete Green's function.
//!
//! Differentiating the Crank–Nicolson step in the drift gives
//! `(I + dt/2 L) w⁺ = (I - dt/2 L) w - dt/2 div_h(p + p⁺)` with `w = 0` at
//! `t = 0`, which is the same scheme applied to
//! `∂_t u + L_μ u = -div(h p)`. The remainder
//! `P(μ+εh) - P(μ) - ε P′(μ)[h]` is then exactly second order in `ε` at the
//! discrete level, provided both solves use the same step counts.

use rayon::prelude::*;

use super::generator::{advective_divergence, FaceField};
use super::grid::{DensityField, FpBoundary};
use super::solver::{build_steps, GreensTensor, KernelField};
use crate::error::{Error, Result};

fn check_direction(base: &GreensTensor, h: &FaceField) -> Result<()> {
    let grid = base.grid();
    if h.values().len() != grid.len() + 1 {
        return Err(Error::Dimension(format!(
            "perturbation has {} face values, grid has {} faces",
            h.values().len(),
            grid.len() + 1
        )));
    }
    if base.generator().boundary() == FpBoundary::NeumannNoFlux {
        h.check_no_flux("perturbation")?;
    }
    Ok(())
}

/// `P′(μ)[h](t_s, ·, x0)` for every positive time, laid out `[s][x]`.
pub fn linearized_solution(base: &GreensTensor, h: &FaceField, x0: usize) -> Result<Vec<f64>> {
    check_direction(base, h)?;
    linearized_column(base, h, x0)
}

fn linearized_column(base: &GreensTensor, h: &FaceField, x0: usize) -> Result<Vec<f64>> {
    let gen = base.generator();
    let grid = *gen.grid();
    let bc = gen.boundary();
    let n = grid.len();
    let steps = build_steps(gen, base.schedule(), base.substeps())?;
    let mut p = DensityField::delta(grid, x0)?.into_values();
    let mut p_next = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut sum = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut out = Vec::with_capacity(steps.len() * n);
    for (step, k) in steps.iter().zip(base.substeps()) {
        for _ in 0..*k {
            step.advance(&p, &mut p_next);
            sum.iter_mut()
                .zip(p.iter().zip(&p_next))
                .for_each(|(s, (a, b))| *s = a + b);
            advective_divergence(h, &sum, &grid, bc, &mut div);
            step.explicit_part(&w, &mut rhs);
            rhs.iter_mut()
                .zip(&div)
                .for_each(|(r, d)| *r -= 0.5 * step.dt * d);
            step.solve(&mut rhs);
            std::mem::swap(&mut w, &mut rhs);
            std::mem::swap(&mut p, &mut p_next);
        }
        out.extend_from_slice(&w);
    }
    Ok(out)
}

/// `P′(μ)[h](t_s, x, x0)` for all columns, computed in parallel.
pub fn linearized_tensor(base: &GreensTensor, h: &FaceField) -> Result<KernelField> {
    check_direction(base, h)?;
    let grid = *base.grid();
    let cols = (0..grid.len())
        .into_par_iter()
        .map(|x0| linearized_column(base, h, x0))
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelField::from_columns(
        grid,
        base.times().to_vec(),
        &cols,
    ))
}
