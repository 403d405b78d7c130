//! Drift identification for one-dimensional SDEs from particle trajectories.

pub mod cli;
pub mod divergences;
pub mod error;
pub mod experiment;
pub mod fokker_planck;
pub mod lbfgs;
pub mod likelihood;
pub mod map_estimator;
pub mod potential;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
