//! Configuration and drivers for the numerical experiments.

mod config;
mod convergence;
mod suites;

pub use config::{
    ConcentrationSection, ConeConfig, EstimatorConfig, ExperimentConfig, GreensConfig,
    KlSuiteConfig, ModelConfig, ScheduleConfig, SweepConfig,
};
pub use convergence::{
    fit_rate, run_convergence_experiment, summarize, thread_pool, ConvergenceOutcome,
    ExperimentRecord, SummaryRow, THREADS_ENV,
};
pub use suites::{
    run_concentration, run_cone_check, run_fp_greens, run_kl_suite, ErrRow, KlSuiteReport,
    MarginRow,
};
