//! Conservative finite-volume discretization of
//! `L_μ p = -Δ(σ²p/2) + div(μ p)`, so that the Fokker–Planck equation reads
//! `∂_t p + L_μ p = 0`.
//!
//! The flux through face `f` between cells `l` and `r` is
//! `J_f = μ_f (p_l + p_r)/2 - (σ²/2)(p_r - p_l)/dx`. Boundary faces carry no
//! flux in the no-flux case and connect cell `N-1` to cell `0` when periodic.

use super::grid::{FpBoundary, SpatialGrid};
use super::tridiag::Tridiagonal;
use crate::error::{Error, Result};
use crate::potential::DriftSpec;

/// Drift and boundary tolerance for the no-flux condition `μ·ν = 0`.
const NORMAL_DRIFT_TOL: f64 = 1e-9;

/// Largest admissible cell Péclet number `|μ_f| dx / (σ²/2)`.
pub const MAX_CELL_PECLET: f64 = 2.0;

/// A field sampled on the `N + 1` cell faces of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    values: Vec<f64>,
}

impl FaceField {
    pub fn new(grid: &SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() + 1 {
            return Err(Error::Dimension(format!(
                "face field needs {} values, got {}",
                grid.len() + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("face field values must be finite".into()));
        }
        Ok(Self { values })
    }

    /// Samples `drift` at every face.
    pub fn from_drift(grid: &SpatialGrid, drift: &DriftSpec) -> Self {
        Self {
            values: grid.faces().into_iter().map(|x| drift.eval(x)).collect(),
        }
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self {
            values: vec![0.0; grid.len() + 1],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &FaceField) -> FaceField {
        FaceField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + scale * b)
                .collect(),
        }
    }

    pub fn scaled(&self, scale: f64) -> FaceField {
        FaceField {
            values: self.values.iter().map(|v| scale * v).collect(),
        }
    }

    /// Checks the vanishing normal component required by the no-flux condition.
    pub fn check_no_flux(&self, what: &str) -> Result<()> {
        let scale = 1.0 + self.sup_norm();
        let n = self.values.len() - 1;
        for (f, v) in [(0, self.values[0]), (n, self.values[n])] {
            if v.abs() > NORMAL_DRIFT_TOL * scale {
                return Err(Error::Model(format!(
                    "{what} has normal component {v} at boundary face {f}; no-flux boundaries need zero"
                )));
            }
        }
        Ok(())
    }
}

/// Discrete `L_μ` on a grid, stored as a (possibly cyclic) tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGenerator {
    grid: SpatialGrid,
    sigma: f64,
    bc: FpBoundary,
    face_drift: FaceField,
    matrix: Tridiagonal,
}

/// Faces carrying flux, as `(face, left cell, right cell)`.
fn active_faces(grid: &SpatialGrid, bc: FpBoundary) -> impl Iterator<Item = (usize, usize, usize)> {
    let n = grid.len();
    let periodic = (bc == FpBoundary::Periodic).then_some((0, n - 1, 0));
    (1..n).map(|f| (f, f - 1, f)).chain(periodic)
}

impl DiscreteGenerator {
    pub fn from_face_drift(
        face_drift: FaceField,
        sigma: f64,
        grid: SpatialGrid,
        bc: FpBoundary,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if face_drift.values.len() != grid.len() + 1 {
            return Err(Error::Dimension(
                "face drift does not match the grid".into(),
            ));
        }
        if bc == FpBoundary::NeumannNoFlux {
            face_drift.check_no_flux("drift")?;
        }
        let dx = grid.dx();
        let diffusion = 0.5 * sigma * sigma;
        let n = grid.len();
        let mut a = Tridiagonal::zeros(n, bc == FpBoundary::Periodic);
        for (f, l, r) in active_faces(&grid, bc) {
            let mu = face_drift.values[f];
            let peclet = mu.abs() * dx / diffusion;
            if peclet > MAX_CELL_PECLET {
                return Err(Error::Resolution { peclet, face: f });
            }
            // J_f = alpha p_l + beta p_r; L p gains +J_f/dx in cell l and -J_f/dx in cell r
            let alpha = (0.5 * mu + diffusion / dx) / dx;
            let beta = (0.5 * mu - diffusion / dx) / dx;
            a.diag[l] += alpha;
            a.diag[r] -= beta;
            add_offdiag(&mut a, l, r, beta);
            add_offdiag(&mut a, r, l, -alpha);
        }
        Ok(Self {
            grid,
            sigma,
            bc,
            face_drift,
            matrix: a,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn boundary(&self) -> FpBoundary {
        self.bc
    }

    pub fn face_drift(&self) -> &FaceField {
        &self.face_drift
    }

    pub fn matrix(&self) -> &Tridiagonal {
        &self.matrix
    }

    /// `out = L_μ p`.
    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        self.matrix.matvec(p, out);
    }

    /// Largest diagonal entry; the Crank–Nicolson step stays positivity
    /// preserving while `dt * max_diagonal <= 2`.
    pub fn max_diagonal(&self) -> f64 {
        self.matrix.diag.iter().copied().fold(0.0, f64::max)
    }
}

/// Adds `value` at `(row, col)` where `col` is a neighbour of `row`.
fn add_offdiag(m: &mut Tridiagonal, row: usize, col: usize, value: f64) {
    let n = m.len();
    if col == (row + 1) % n {
        m.upper[row] += value;
    } else {
        m.lower[row] += value;
    }
}

/// `out = div_h(p)`, the advective part of `L` with `h` in place of `μ`:
/// `(F_{i+1} - F_i)/dx` with face fluxes `F_f = h_f (p_l + p_r)/2`.
pub fn advective_divergence(
    h: &FaceField,
    p: &[f64],
    grid: &SpatialGrid,
    bc: FpBoundary,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let dx = grid.dx();
    for (f, l, r) in active_faces(grid, bc) {
        let flux = h.values[f] * 0.5 * (p[l] + p[r]) / dx;
        out[l] += flux;
        out[r] -= flux;
    }
}

/// Builds the generator for `drift` sampled on the grid faces.
pub fn build_generator(
    drift: &DriftSpec,
    sigma: f64,
    grid: SpatialGrid,
    bc: FpBoundary,
) -> Result<DiscreteGenerator> {
    if bc == FpBoundary::Periodic {
        let period = drift.potential().period_length();
        if (period - grid.length()).abs() > 1e-12 * grid.length() {
            return Err(Error::Model(format!(
                "periodic grid of length {} but potential period {period}",
                grid.length()
            )));
        }
    }
    DiscreteGenerator::from_face_drift(FaceField::from_drift(&grid, drift), sigma, grid, bc)
}
