//! Limited-memory BFGS with a backtracking (sufficient decrease) line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Slack allowed in the decrease test: a few ulps of the objective.
fn roundoff_slack(f: f64) -> f64 {
    8.0 * f64::EPSILON * (1.0 + f.abs())
}

/// Two-loop recursion: returns `-H g` for the implicit inverse Hessian `H`.
fn direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

/// Minimizes `f` starting from `x0`; `f` returns the value and gradient.
///
/// Stops when `‖∇f‖₂ <= grad_tol` (converged) or after `max_iters`
/// iterations or a failed line search (not converged). A non-finite value
/// at any evaluated point is an error carrying that point.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(cfg.grad_tol > 0.0) {
        return Err(Error::Config(format!(
            "grad_tol must be positive, got {}",
            cfg.grad_tol
        )));
    }
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            value: fx,
            theta: x,
        });
    }
    let mut trace = vec![TraceEntry {
        objective: fx,
        grad_norm: norm(&g),
    }];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let mut converged = norm(&g) <= cfg.grad_tol;

    while !converged && iterations < cfg.max_iters {
        let mut d = direction(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if history.is_empty() {
            (1.0 / norm(&g)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&trial)?;
            if !ft.is_finite() || gt.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    value: ft,
                    theta: trial,
                });
            }
            if ft <= fx + ARMIJO_C1 * step * slope + roundoff_slack(fx)
                && ft <= fx + roundoff_slack(fx)
            {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            if cfg.memory > 0 {
                history.push_back((s, y, 1.0 / sy));
            }
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        let gn = norm(&g);
        trace.push(TraceEntry {
            objective: fx,
            grad_norm: gn,
        });
        converged = gn <= cfg.grad_tol;
    }

    Ok(Minimum {
        x,
        value: fx,
        grad: g,
        iterations,
        converged,
        trace,
    })
}
