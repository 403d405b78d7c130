//! Command-line front end. [`run`] returns the process exit status:
//! 0 on success, 2 for usage or configuration errors, 3 for numerical failures.

use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{
    run_concentration, run_cone_check, run_convergence_experiment, run_fp_greens, run_kl_suite,
    ExperimentConfig,
};
use crate::map_estimator::{infer_map, l2_error};
use crate::sde::{simulate_trajectories, TrajectoryMeta, TrajectorySet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "driftid",
    version,
    about = "Drift identification for SDEs from particle trajectories"
)]
struct Cli {
    /// JSON configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate particle paths of the true drift and write them as CSV.
    Simulate {
        /// Number of particles.
        #[arg(long)]
        n: usize,
        /// CSV path (stdout when omitted); metadata goes to `<out>.meta.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the potential from a trajectory CSV.
    Infer {
        /// Trajectory CSV with columns particle,step,time,position.
        #[arg(long)]
        data: PathBuf,
        /// Defaults to `<data>.meta.json`, then to the configuration.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error-versus-particle-count study with a log-log rate fit.
    Convergence {
        /// Output directory (defaults to `output_dir` of the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the Green's tensor of the Fokker–Planck equation.
    FpGreens {
        /// Output directory (defaults to `output_dir` of the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tangential cone report of the forward map around the true drift.
    ConeCheck {
        /// Output directory (defaults to `output_dir` of the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-instance checks of the KL–L² bounds and the Err_τ identity.
    KlSuite {
        /// Output directory (defaults to `output_dir` of the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Concentration sweep of the empirical measure on a trig dictionary.
    Concentration {
        /// Output directory (defaults to `output_dir` of the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.sweep.seed = s;
        cfg.kl_suite.seed = s;
        cfg.concentration.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Simulate { n, out } => {
            if *n == 0 {
                return Err(Error::Usage("--n must be positive".into()));
            }
            let data = simulate_trajectories(
                &cfg.model.truth,
                cfg.model.sigma,
                &cfg.time_schedule()?,
                &cfg.initial_law()?,
                &cfg.model.domain,
                *n,
                cli.seed.unwrap_or(cfg.sweep.seed),
            )?;
            let mut w = open_out(out)?;
            data.write_csv(&mut w)?;
            w.flush()?;
            if let Some(p) = out {
                std::fs::write(sidecar(p), serde_json::to_string_pretty(&data.meta())?)?;
            }
        }
        Command::Infer { data, meta, out } => {
            let meta_path = meta.clone().unwrap_or_else(|| sidecar(data));
            let meta: TrajectoryMeta = if meta.is_some() || meta_path.exists() {
                serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?
            } else {
                TrajectoryMeta {
                    sigma: cfg.model.sigma,
                    seed: 0,
                    domain: cfg.model.domain,
                    schedule: cfg.time_schedule()?,
                }
            };
            let set = TrajectorySet::read_csv(BufReader::new(File::open(data)?), &meta)?;
            let mut model = cfg.model_spec();
            model.sigma = meta.sigma;
            model.domain = meta.domain;
            let result = infer_map(&set, &model, &cfg.tikhonov()?, &cfg.optimizer())?;
            let mut w = open_out(out)?;
            writeln!(w, "{}", result.to_json()?)?;
            w.flush()?;
            if out.is_some() {
                let err = l2_error(&result.theta_hat, cfg.model.truth.potential())?;
                println!(
                    "particles={} iterations={} converged={} l2_error_vs_config_truth={err:.6}",
                    set.particles(),
                    result.iterations,
                    result.converged
                );
            }
        }
        Command::Convergence { out } => {
            let outcome = run_convergence_experiment(&cfg)?;
            let dir = out_dir(&cfg, out)?;
            outcome.write(&dir)?;
            for s in &outcome.summary {
                println!(
                    "n={} median={:.6} mean={:.6} variance={:.3e} failures={}",
                    s.n, s.median, s.mean, s.variance, s.failures
                );
            }
            println!(
                "slope={:.4} intercept={:.4} residual={:.3e}",
                outcome.rate.slope, outcome.rate.intercept, outcome.rate.residual
            );
        }
        Command::FpGreens { out } => {
            let g = run_fp_greens(&cfg)?;
            let dir = out_dir(&cfg, out)?;
            g.write_csv(BufWriter::new(File::create(dir.join("greens.csv"))?))?;
            println!(
                "max_mass_error={:.3e} max_step_mass_drift={:.3e}",
                g.max_mass_error(),
                g.max_step_mass_drift()
            );
        }
        Command::ConeCheck { out } => {
            let report = run_cone_check(&cfg)?;
            let dir = out_dir(&cfg, out)?;
            report.write_csv(BufWriter::new(File::create(dir.join("cone.csv"))?))?;
            println!(
                "remainder_exponent={:.4} ratio_weak_variation={:.4}",
                report.remainder_exponent()?,
                report.ratio_weak_variation()
            );
        }
        Command::KlSuite { out } => {
            let report = run_kl_suite(&cfg)?;
            let dir = out_dir(&cfg, out)?;
            report.write(&dir)?;
            for kind in ["base", "one_step", "two_step"] {
                println!("{kind}: min_margin={:.3e}", report.min_margin(kind));
            }
            println!("err_tau: max_gap={:.3e}", report.max_err_gap());
        }
        Command::Concentration { out } => {
            let table = run_concentration(&cfg)?;
            let dir = out_dir(&cfg, out)?;
            table.write_rows_csv(BufWriter::new(File::create(dir.join("concentration.csv"))?))?;
            table.write_tails_csv(BufWriter::new(File::create(
                dir.join("concentration_tails.csv"),
            )?))?;
            for n in &cfg.concentration.n_list {
                if let Some(m) = table.median_scaled(*n) {
                    println!("n={n} median_sqrt_n_discrepancy={m:.4}");
                }
            }
        }
    }
    Ok(())
}
