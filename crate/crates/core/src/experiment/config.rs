use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::likelihood::TikhonovConfig;
use crate::map_estimator::{ModelSpec, OptimizerConfig};
use crate::potential::{DriftSpec, FourierPotential, SobolevOrder};
use crate::sde::{BoundaryMode, Domain, InitialLaw, TimeSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub sigma: f64,
    /// Number of Fourier modes `K` of the estimated potential.
    pub num_modes: usize,
    /// True drift `u + Φ′` used to simulate data.
    pub truth: DriftSpec,
    pub domain: Domain,
    /// Law of the initial positions; uniform on the domain when absent.
    pub initial: Option<InitialLaw>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let truth = FourierPotential::two_well(8, 1.0).expect("valid default potential");
        Self {
            sigma: 1.0,
            num_modes: 8,
            truth: DriftSpec::new(truth, 5.0).expect("finite flux"),
            domain: Domain::unit(BoundaryMode::Periodic),
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub final_time: f64,
    pub steps: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            final_time: 1.0,
            steps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub order: SobolevOrder,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        Self {
            alpha: 0.0,
            order: SobolevOrder::new(1.0).expect("valid order"),
            max_iters: opt.max_iters,
            grad_tol: opt.grad_tol,
            memory: opt.memory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_values: (3..=10).map(|k| 1 << k).collect(),
            reps: 25,
            seed: 20_240_817,
        }
    }
}

/// Green's tensor export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreensConfig {
    pub cells: usize,
    pub final_time: f64,
    pub steps: usize,
    pub min_substeps: usize,
}

impl Default for GreensConfig {
    fn default() -> Self {
        Self {
            cells: 64,
            final_time: 0.1,
            steps: 10,
            min_substeps: 1,
        }
    }
}

/// Tangential cone check around the true drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeConfig {
    pub cells: usize,
    pub final_time: f64,
    pub steps: usize,
    pub scales: Vec<f64>,
    /// Perturbation `h = ψ′` given by a potential `ψ` (its `u` is added as a constant).
    pub direction: DriftSpec,
    pub weight_exponent: f64,
    pub min_substeps: usize,
}

impl Default for ConeConfig {
    fn default() -> Self {
        let psi = FourierPotential::new(vec![0.0, 0.0, 0.02], vec![0.0; 3], 1.0)
            .expect("valid direction");
        Self {
            cells: 48,
            final_time: 0.1,
            steps: 4,
            scales: (0..5).map(|k| 0.5f64.powi(k)).collect(),
            direction: DriftSpec::new(psi, 0.0).expect("finite flux"),
            weight_exponent: 0.25,
            min_substeps: 1,
        }
    }
}

/// Random instances for the KL–L² and `Err_τ` checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KlSuiteConfig {
    pub cells: usize,
    pub cells_two_step: usize,
    pub base_instances: usize,
    pub one_step_instances: usize,
    pub two_step_instances: usize,
    pub err_instances: usize,
    pub err_samples: usize,
    pub tau: f64,
    pub order: usize,
    pub floor: f64,
    pub seed: u64,
}

impl Default for KlSuiteConfig {
    fn default() -> Self {
        Self {
            cells: 64,
            cells_two_step: 24,
            base_instances: 100,
            one_step_instances: 100,
            two_step_instances: 20,
            err_instances: 50,
            err_samples: 500,
            tau: 0.1,
            order: 2,
            floor: 0.05,
            seed: 7,
        }
    }
}

/// Concentration sweep on the one-step product density of the true drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationSection {
    pub cells: usize,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub rho: Vec<f64>,
    pub dictionary_order: usize,
    pub seed: u64,
}

impl Default for ConcentrationSection {
    fn default() -> Self {
        Self {
            cells: 32,
            n_list: vec![100, 1000, 10_000],
            reps: 100,
            rho: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
            dictionary_order: 2,
            seed: 11,
        }
    }
}

/// Everything the command-line tool can be configured with; every field
/// has a default, so `{}` is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub estimator: EstimatorConfig,
    pub sweep: SweepConfig,
    pub greens: GreensConfig,
    pub cone: ConeConfig,
    pub kl_suite: KlSuiteConfig,
    pub concentration: ConcentrationSection,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            schedule: ScheduleConfig::default(),
            estimator: EstimatorConfig::default(),
            sweep: SweepConfig::default(),
            greens: GreensConfig::default(),
            cone: ConeConfig::default(),
            kl_suite: KlSuiteConfig::default(),
            concentration: ConcentrationSection::default(),
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if !(m.sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                m.sigma
            )));
        }
        if m.num_modes == 0 {
            return Err(Error::Config("num_modes must be at least 1".into()));
        }
        m.truth.check_domain(&m.domain)?;
        self.initial_law()?.check_support(&m.domain)?;
        self.time_schedule()?;
        TikhonovConfig::new(self.estimator.alpha, self.estimator.order)?;
        let s = &self.sweep;
        if s.n_values.is_empty()
            || s.n_values[0] == 0
            || s.n_values.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "sweep n_values must be positive and increasing".into(),
            ));
        }
        if s.reps == 0 {
            return Err(Error::Config("sweep needs at least one repetition".into()));
        }
        Ok(())
    }

    pub fn time_schedule(&self) -> Result<TimeSchedule> {
        TimeSchedule::uniform(self.schedule.final_time, self.schedule.steps)
    }

    pub fn initial_law(&self) -> Result<InitialLaw> {
        match &self.model.initial {
            Some(law) => Ok(law.clone()),
            None => InitialLaw::uniform(self.model.domain.a(), self.model.domain.b()),
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            constant_flux: self.model.truth.constant_flux(),
            num_modes: self.model.num_modes,
            sigma: self.model.sigma,
            domain: self.model.domain,
        }
    }

    pub fn tikhonov(&self) -> Result<TikhonovConfig> {
        TikhonovConfig::new(self.estimator.alpha, self.estimator.order)
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iters: self.estimator.max_iters,
            grad_tol: self.estimator.grad_tol,
            initial_theta: None,
            memory: self.estimator.memory,
        }
    }
}
