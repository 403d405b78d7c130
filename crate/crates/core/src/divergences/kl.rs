use crate::error::{Error, Result};
use crate::fokker_planck::DensityField;

/// `Σ [(u+τ) ln((u+τ)/(z+τ)) + z - u] · cell_measure`, the shifted
/// Kullback–Leibler divergence `KL(z+τ, u+τ)` of two gridded functions.
///
/// With `τ = 0`, cells where `u = 0` contribute `z`, and any cell with
/// `z = 0 < u` makes the value `+∞`.
pub fn kl_divergence_values(z: &[f64], u: &[f64], cell_measure: f64, tau: f64) -> Result<f64> {
    if z.len() != u.len() {
        return Err(Error::Dimension(format!(
            "{} vs {} values",
            z.len(),
            u.len()
        )));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!(
            "shift must be finite and >= 0, got {tau}"
        )));
    }
    if z.iter().chain(u).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(
            "KL arguments must be finite and nonnegative".into(),
        ));
    }
    let mut total = 0.0;
    for (zi, ui) in z.iter().zip(u) {
        let (zs, us) = (zi + tau, ui + tau);
        let log_term = if us == 0.0 {
            0.0
        } else if zs == 0.0 {
            return Ok(f64::INFINITY);
        } else {
            us * (us / zs).ln()
        };
        total += log_term + zi - ui;
    }
    // each cell term is nonnegative; cancellation can leave a tiny negative sum
    Ok((total * cell_measure).max(0.0))
}

/// `KL(z+τ, u+τ)` on a shared grid.
pub fn kl_divergence(z: &DensityField, u: &DensityField, tau: f64) -> Result<f64> {
    if z.grid() != u.grid() {
        return Err(Error::Dimension("densities live on different grids".into()));
    }
    kl_divergence_values(z.values(), u.values(), z.grid().dx(), tau)
}

/// Squared `L²` distance over cells of measure `cell_measure`.
pub(crate) fn l2_distance_sq(a: &[f64], b: &[f64], cell_measure: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * cell_measure
}

pub(crate) fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Both sides of `‖x - y‖²_{L²} <= 2 max(‖x‖_∞, ‖y‖_∞) KL(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundMargin {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
}

/// Checks the `L²`–KL inequality for two nonnegative functions on a grid.
pub fn l2_kl_base_check(x: &DensityField, y: &DensityField) -> Result<BoundMargin> {
    if y.values().iter().any(|v| *v <= 0.0) {
        return Err(Error::Domain(
            "second argument must be strictly positive".into(),
        ));
    }
    let kl = kl_divergence(x, y, 0.0)?;
    let lhs = l2_distance_sq(x.values(), y.values(), x.grid().dx());
    let rhs = 2.0 * sup_norm(x.values()).max(sup_norm(y.values())) * kl;
    Ok(BoundMargin {
        lhs,
        rhs,
        margin: rhs - lhs,
    })
}
