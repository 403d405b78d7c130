use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::BoundaryMode;

/// Boundary condition of the Fokker–Planck solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpBoundary {
    /// Zero total flux through both ends.
    NeumannNoFlux,
    Periodic,
}

impl From<BoundaryMode> for FpBoundary {
    fn from(mode: BoundaryMode) -> Self {
        match mode {
            BoundaryMode::Periodic => FpBoundary::Periodic,
            BoundaryMode::Reflecting => FpBoundary::NeumannNoFlux,
        }
    }
}

/// `N` equal cells on `[a, b]`; unknowns live at the cell centres and every
/// cell carries the quadrature weight `dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    a: f64,
    b: f64,
    cells: usize,
}

pub const MIN_CELLS: usize = 16;

impl SpatialGrid {
    pub fn new(a: f64, b: f64, cells: usize) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(Error::Config(format!(
                "grid needs at least {MIN_CELLS} cells, got {cells}"
            )));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!("grid needs a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b, cells })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.cells as f64
    }

    /// Centre of cell `i`.
    pub fn node(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.node(i)).collect()
    }

    /// Face `f` is the left edge of cell `f`; there are `N + 1` faces.
    pub fn face(&self, f: usize) -> f64 {
        if f == self.cells {
            self.b
        } else {
            self.a + f as f64 * self.dx()
        }
    }

    pub fn faces(&self) -> Vec<f64> {
        (0..=self.cells).map(|f| self.face(f)).collect()
    }

    /// Index of the cell containing `x` (clamped to the grid).
    pub fn cell_of(&self, x: f64) -> usize {
        let i = ((x - self.a) / self.dx()).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.cells - 1)
        }
    }

    /// Distance between two points, measured around the circle when periodic.
    pub fn distance(&self, x: f64, y: f64, bc: FpBoundary) -> f64 {
        let d = (x - y).abs();
        match bc {
            FpBoundary::NeumannNoFlux => d,
            FpBoundary::Periodic => d.min(self.length() - d),
        }
    }
}

/// Gridded nonnegative density (or any field) on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values on a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn uniform(grid: SpatialGrid) -> Self {
        Self {
            grid,
            values: vec![1.0 / grid.length(); grid.len()],
        }
    }

    /// Discrete delta: `1/dx` in cell `i`, zero elsewhere.
    pub fn delta(grid: SpatialGrid, i: usize) -> Result<Self> {
        if i >= grid.len() {
            return Err(Error::Dimension(format!(
                "cell {i} outside grid of {}",
                grid.len()
            )));
        }
        let mut values = vec![0.0; grid.len()];
        values[i] = 1.0 / grid.dx();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    /// Rescales to unit mass.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::Domain(
                "cannot normalize a density of zero mass".into(),
            ));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(self)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = SpatialGrid::new(0.0, 1.0, 16).unwrap();
        assert_eq!(g.dx(), 1.0 / 16.0);
        assert_eq!(g.node(0), 1.0 / 32.0);
        assert_eq!(g.face(16), 1.0);
        assert_eq!(g.cell_of(0.999), 15);
        assert_eq!(g.cell_of(1.0), 15);
        assert_eq!(g.cell_of(-0.1), 0);
        assert!(SpatialGrid::new(0.0, 1.0, 8).is_err());
        assert!((g.distance(0.05, 0.95, FpBoundary::Periodic) - 0.1).abs() < 1e-15);
        assert!((g.distance(0.05, 0.95, FpBoundary::NeumannNoFlux) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn density_constructors() {
        let g = SpatialGrid::new(0.0, 2.0, 32).unwrap();
        assert!((DensityField::uniform(g).mass() - 1.0).abs() < 1e-15);
        assert!((DensityField::delta(g, 5).unwrap().mass() - 1.0).abs() < 1e-15);
        assert!(DensityField::new(g, vec![-1.0; 32]).is_err());
        let d = DensityField::from_fn(g, |x| x)
            .unwrap()
            .normalized()
            .unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-14);
    }
}
