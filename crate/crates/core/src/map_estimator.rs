//! MAP estimate of the potential: minimize the Tikhonov objective over the
//! Fourier coefficients.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsConfig, TraceEntry};
use crate::likelihood::{tikhonov_objective, FidelityConfig, TikhonovConfig};
use crate::potential::{DriftSpec, FourierPotential, SobolevOrder};
use crate::sde::{Domain, TrajectorySet};

/// Known parts of the model: flux `u`, number of modes `K`, `σ` and the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub constant_flux: f64,
    pub num_modes: usize,
    pub sigma: f64,
    pub domain: Domain,
}

impl ModelSpec {
    pub fn fidelity(&self) -> Result<FidelityConfig> {
        FidelityConfig::new(self.sigma, self.domain)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Starting point; all-zero coefficients when `None`.
    pub initial_theta: Option<FourierPotential>,
    pub memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let d = LbfgsConfig::default();
        Self {
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            initial_theta: None,
            memory: d.memory,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub theta_hat: FourierPotential,
    pub constant_flux: f64,
    pub objective_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct InferenceJson {
    theta: DriftSpec,
    iterations: usize,
    converged: bool,
    final_objective: f64,
}

impl InferenceResult {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds at least the starting point")
    }

    pub fn drift(&self) -> DriftSpec {
        DriftSpec::new(self.theta_hat.clone(), self.constant_flux).expect("finite flux")
    }

    /// `{"theta": {"L", "cos", "sin", "u"}, "iterations", "converged", "final_objective"}`.
    pub fn to_json(&self) -> Result<String> {
        let j = InferenceJson {
            theta: self.drift(),
            iterations: self.iterations,
            converged: self.converged,
            final_objective: self.final_objective(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    /// Reads the estimated drift back from [`Self::to_json`] output.
    pub fn drift_from_json(text: &str) -> Result<DriftSpec> {
        let j: InferenceJson = serde_json::from_str(text)?;
        Ok(j.theta)
    }

    /// Writes the optimizer trace as `iter,objective,grad_norm`.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iter", "objective", "grad_norm"])?;
        for (i, (f, g)) in self
            .objective_trace
            .iter()
            .zip(&self.grad_norm_trace)
            .enumerate()
        {
            w.serialize((i, f, g))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Minimizes `S(F(θ), Gⁿ) + α ‖Φ_θ‖²_{H^r}` with L-BFGS.
pub fn infer_map(
    data: &TrajectorySet,
    model: &ModelSpec,
    tikhonov: &TikhonovConfig,
    optimizer: &OptimizerConfig,
) -> Result<InferenceResult> {
    if data.is_empty() {
        return Err(Error::Usage(
            "cannot infer a drift from an empty data set".into(),
        ));
    }
    if model.num_modes == 0 {
        return Err(Error::Config("need at least one Fourier mode".into()));
    }
    let fidelity = model.fidelity()?;
    let length = model.domain.length();
    let x0 = match &optimizer.initial_theta {
        Some(p) => {
            if p.num_modes() != model.num_modes || p.period_length() != length {
                return Err(Error::Dimension(
                    "initial potential does not match the model".into(),
                ));
            }
            p.theta()
        }
        None => vec![0.0; 2 * model.num_modes],
    };
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let p = FourierPotential::from_theta(theta, length).map_err(|_| Error::NonFinite {
            value: f64::NAN,
            theta: theta.to_vec(),
        })?;
        tikhonov_objective(&p, data, &fidelity, tikhonov, model.constant_flux)
    };
    let cfg = LbfgsConfig {
        max_iters: optimizer.max_iters,
        grad_tol: optimizer.grad_tol,
        memory: optimizer.memory,
    };
    let min = lbfgs::minimize(objective, x0, &cfg)?;
    let (objective_trace, grad_norm_trace) = min
        .trace
        .iter()
        .map(
            |TraceEntry {
                 objective,
                 grad_norm,
             }| (*objective, *grad_norm),
        )
        .unzip();
    Ok(InferenceResult {
        theta_hat: FourierPotential::from_theta(&min.x, length)?,
        constant_flux: model.constant_flux,
        objective_trace,
        grad_norm_trace,
        converged: min.converged,
        iterations: min.iterations,
    })
}

/// Exact L² distance between two potentials (Parseval). The shorter
/// coefficient vector is zero-padded; the period lengths must agree.
pub fn l2_error(theta_hat: &FourierPotential, theta_true: &FourierPotential) -> Result<f64> {
    if theta_hat.period_length() != theta_true.period_length() {
        return Err(Error::Dimension(format!(
            "period lengths differ: {} vs {}",
            theta_hat.period_length(),
            theta_true.period_length()
        )));
    }
    let k = theta_hat.num_modes().max(theta_true.num_modes());
    let diff = theta_hat.padded(k).sub(&theta_true.padded(k))?;
    Ok(diff.sobolev_norm_sq(SobolevOrder::L2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_error_examples() {
        let p = FourierPotential::new(vec![0.2, 0.1], vec![0.0, -0.3], 1.0).unwrap();
        assert_eq!(l2_error(&p, &p).unwrap(), 0.0);
        let one = FourierPotential::new(vec![1.0], vec![0.0], 1.0).unwrap();
        let zero = FourierPotential::zeros(3, 1.0).unwrap();
        assert!((l2_error(&one, &zero).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let other = FourierPotential::zeros(1, 2.0).unwrap();
        assert!(matches!(l2_error(&one, &other), Err(Error::Dimension(_))));
    }

    #[test]
    fn l2_error_matches_trapezoid_quadrature() {
        let a = FourierPotential::new(vec![0.3, -0.2, 0.05], vec![0.1, 0.0, 0.02], 1.0).unwrap();
        let b = FourierPotential::new(vec![0.1, 0.1], vec![-0.2, 0.3], 1.0).unwrap();
        let n = 4096;
        let h = 1.0 / n as f64;
        // periodic trapezoid: endpoint weights merge into one full weight
        let quad: f64 = (0..n)
            .map(|i| (a.eval(i as f64 * h) - b.eval(i as f64 * h)).powi(2) * h)
            .sum();
        let e = l2_error(&a, &b).unwrap();
        assert!((e * e - quad).abs() < 1e-8 * quad);
    }

    #[test]
    fn json_shape() {
        let r = InferenceResult {
            theta_hat: FourierPotential::two_well(2, 1.0).unwrap(),
            constant_flux: 5.0,
            objective_trace: vec![3.0, 1.0],
            grad_norm_trace: vec![2.0, 1e-9],
            converged: true,
            iterations: 1,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["iterations"], 1);
        assert_eq!(v["converged"], true);
        assert_eq!(v["final_objective"], 1.0);
        assert_eq!(v["theta"]["u"], 5.0);
        let d = InferenceResult::drift_from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(d, r.drift());
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("iter,objective,grad_norm\n0,3.0,2.0\n"));
    }
}
