//! Finite-volume Fokker–Planck solver on an interval, the Green's function
//! of the SDE and its derivative in the drift.

mod cone;
mod envelope;
mod generator;
mod grid;
mod linearized;
mod norms;
mod solver;
mod tridiag;

pub use cone::{tangential_cone_report, ConeReport, ConeRow};
pub use envelope::{
    gaussian_mass, validate_gaussian_envelope, EnvelopeConfig, EnvelopeReport, EnvelopeRow,
};
pub use generator::{
    advective_divergence, build_generator, DiscreteGenerator, FaceField, MAX_CELL_PECLET,
};
pub use grid::{DensityField, FpBoundary, SpatialGrid, MIN_CELLS};
pub use linearized::{linearized_solution, linearized_tensor};
pub use norms::{weighted_time_norm, WeightedNormSpec};
pub use solver::{
    forward_operator, greens_function, solve_fp, ForwardOperator, FpSolution, GreensTensor,
    KernelField, StepPlan,
};
pub use tridiag::{Tridiagonal, TridiagonalFactor};
