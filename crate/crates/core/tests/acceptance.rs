//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits non-zero if any criterion fails.

mod common;

use driftid::experiment::{run_concentration, run_kl_suite, ExperimentConfig};
use driftid::fokker_planck::{
    build_generator, forward_operator, greens_function, tangential_cone_report, FaceField,
    FpBoundary, SpatialGrid, StepPlan, WeightedNormSpec,
};
use driftid::likelihood::{FidelityConfig, TikhonovConfig};
use driftid::map_estimator::{l2_error, InferenceResult};
use driftid::potential::{DriftSpec, FourierPotential, SobolevOrder};
use driftid::sde::{simulate_trajectories, InitialLaw, TimeSchedule};
use driftid::stats::median;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

type Outcome = Result<String, String>;

fn driftid(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_driftid"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "driftid {args:?} failed: {}",
            String::from_utf8_lossy(&o.stderr)
        ))
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn convergence_rate(dir: &Path) -> Outcome {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.json");
    let out = dir.join("convergence");
    driftid(&[
        "--config",
        cfg,
        "convergence",
        "--out",
        out.to_str().unwrap(),
    ])?;
    let rate: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("rate.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let slope = rate["slope"].as_f64().ok_or("rate.json has no slope")?;
    let rows = csv::Reader::from_path(out.join("records.csv"))
        .map_err(|e| e.to_string())?
        .records()
        .count();
    check(
        (-0.65..=-0.35).contains(&slope) && rows == 200,
        format!("slope {slope:.4} in [-0.65, -0.35], {rows} records"),
    )
}

fn two_particle_counts(dir: &Path) -> Outcome {
    let truth = FourierPotential::two_well(8, 1.0).unwrap();
    let median_error = |n: usize| -> Result<f64, String> {
        let mut errors = Vec::new();
        for seed in 0..5u64 {
            let data = dir.join(format!("paths_{n}_{seed}.csv"));
            let est = dir.join(format!("theta_{n}_{seed}.json"));
            let (data_s, est_s) = (data.to_str().unwrap(), est.to_str().unwrap());
            driftid(&[
                "simulate",
                "--n",
                &n.to_string(),
                "--seed",
                &(1000 + seed).to_string(),
                "--out",
                data_s,
            ])?;
            driftid(&["infer", "--data", data_s, "--out", est_s])?;
            let text = std::fs::read_to_string(&est).map_err(|e| e.to_string())?;
            let drift = InferenceResult::drift_from_json(&text).map_err(|e| e.to_string())?;
            errors.push(l2_error(drift.potential(), &truth).map_err(|e| e.to_string())?);
        }
        Ok(median(&errors))
    };
    let (small, large) = (median_error(12)?, median_error(120)?);
    check(
        large <= 0.5 * small,
        format!("median L2 error {large:.4} at n=120 vs {small:.4} at n=12"),
    )
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dom = common::unit_periodic();
    let fidelity = FidelityConfig::new(1.0, dom).unwrap();
    let law = InitialLaw::uniform(0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for i in 0..50 {
        let truth = DriftSpec::new(
            common::random_potential(&mut rng, 4, 0.1, 1.0),
            rng.random_range(0.0..5.0),
        )
        .unwrap();
        let schedule = TimeSchedule::uniform(1.0, rng.random_range(5..50)).unwrap();
        let n = rng.random_range(5..40);
        let data = simulate_trajectories(&truth, 1.0, &schedule, &law, &dom, n, i).unwrap();
        let theta = common::random_potential(&mut rng, 6, 0.2, 1.0);
        let alpha = if i % 2 == 0 {
            0.0
        } else {
            rng.random_range(0.0..2.0)
        };
        let tik = TikhonovConfig::new(
            alpha,
            SobolevOrder::new(rng.random_range(0.0..2.0)).unwrap(),
        )
        .unwrap();
        worst = worst.max(common::gradient_fd_error(
            &theta,
            &data,
            &fidelity,
            &tik,
            truth.constant_flux(),
        ));
    }
    check(
        worst < 1e-6,
        format!("max relative gradient error {worst:.2e} over 50 instances"),
    )
}

fn fokker_planck_fidelity() -> Outcome {
    let grid = SpatialGrid::new(0.0, 1.0, 256).unwrap();
    let truth = DriftSpec::new(FourierPotential::two_well(8, 1.0).unwrap(), 5.0).unwrap();
    let gen = build_generator(&truth, 1.0, grid, FpBoundary::Periodic).unwrap();
    let schedule = TimeSchedule::uniform(0.05, 5).unwrap();
    let g = greens_function(&gen, &schedule, &StepPlan::AtLeast(1)).map_err(|e| e.to_string())?;
    let mass_drift = g.max_step_mass_drift();

    let cells = [32, 64, 128, 256];
    let errors: Vec<f64> = cells
        .iter()
        .map(|n| common::image_kernel_error(*n, 0.05, 1.0))
        .collect();
    let order = common::observed_order(&cells, &errors);

    let f = forward_operator(&gen, &schedule, &StepPlan::AtLeast(1)).map_err(|e| e.to_string())?;
    let n = grid.len();
    let mut markov = 0.0f64;
    for i in 0..f.len() {
        let k = f.kernel(i);
        for x0 in 0..n {
            let mass: f64 = (0..n).map(|x| k[x * n + x0]).sum::<f64>() * grid.dx();
            markov = markov.max((mass - 1.0).abs());
        }
        markov = markov.max(-k.iter().copied().fold(0.0, f64::min));
    }
    check(
        mass_drift <= 1e-12 && order >= 1.8 && markov <= 1e-10,
        format!(
            "(a) step mass drift {mass_drift:.1e} (b) image-kernel order {order:.3} (c) Markov defect {markov:.1e} at N=256"
        ),
    )
}

fn tangential_cone() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let grid = SpatialGrid::new(0.0, 1.0, 48).unwrap();
    let schedule = TimeSchedule::uniform(0.1, 4).unwrap();
    let scales: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).collect();
    let spec = WeightedNormSpec::alpha_1d();
    let mut exponents = Vec::new();
    let mut variations = Vec::new();
    for _ in 0..5 {
        let mu = DriftSpec::new(
            common::random_potential(&mut rng, 3, 0.1, 1.0),
            rng.random_range(0.0..5.0),
        )
        .unwrap();
        let h = DriftSpec::new(
            common::random_potential(&mut rng, 3, 0.02, 1.0),
            rng.random_range(-0.5..0.5),
        )
        .unwrap();
        let gen =
            build_generator(&mu, 1.0, grid, FpBoundary::Periodic).map_err(|e| e.to_string())?;
        let h = FaceField::from_drift(&grid, &h);
        let report = tangential_cone_report(&gen, &h, &schedule, &scales, spec, 1)
            .map_err(|e| e.to_string())?;
        exponents.push(report.remainder_exponent().map_err(|e| e.to_string())?);
        variations.push(report.ratio_weak_variation());
    }
    let exp_ok = exponents.iter().all(|q| (1.8..=2.2).contains(q));
    let var_ok = variations.iter().all(|v| *v <= 2.0);
    check(
        exp_ok && var_ok,
        format!("remainder exponents {exponents:.3?}, ratio_weak max/min {variations:.3?}"),
    )
}

fn kl_l2_estimate() -> Outcome {
    let report = run_kl_suite(&ExperimentConfig::default()).map_err(|e| e.to_string())?;
    let count = |kind: &str| report.margins.iter().filter(|r| r.kind == kind).count();
    let (base, one, two) = (
        report.min_margin("base"),
        report.min_margin("one_step"),
        report.min_margin("two_step"),
    );
    check(
        base >= -1e-10
            && one >= -1e-10
            && two >= -1e-10
            && count("one_step") == 100
            && count("two_step") == 20,
        format!(
            "min margins: base {base:.3e} ({}), M=1 {one:.3e} ({}), M=2 {two:.3e} ({})",
            count("base"),
            count("one_step"),
            count("two_step")
        ),
    )
}

fn err_tau_identity() -> Outcome {
    let report = run_kl_suite(&ExperimentConfig::default()).map_err(|e| e.to_string())?;
    let gap = report.max_err_gap();
    check(
        gap <= 1e-8 && report.err.len() == 50,
        format!(
            "max |direct - composed| {gap:.2e} over {} instances",
            report.err.len()
        ),
    )
}

fn concentration() -> Outcome {
    let cfg = ExperimentConfig::default();
    let table = run_concentration(&cfg).map_err(|e| e.to_string())?;
    let medians: Vec<f64> = [100, 1000, 10_000]
        .iter()
        .filter_map(|n| table.median_scaled(*n))
        .collect();
    if medians.len() != 3 {
        return Err("missing sample sizes".into());
    }
    let max = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = medians.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        max / min <= 2.0,
        format!("median sqrt(n) D {medians:.4?}, max/min {:.3}", max / min),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        (
            "convergence rate",
            Box::new(|| convergence_rate(dir.path())),
        ),
        (
            "two particle counts",
            Box::new(|| two_particle_counts(dir.path())),
        ),
        ("gradient correctness", Box::new(gradient_correctness)),
        ("fokker-planck fidelity", Box::new(fokker_planck_fidelity)),
        ("tangential cone", Box::new(tangential_cone)),
        ("kl-l2 estimate", Box::new(kl_l2_estimate)),
        ("err_tau identity", Box::new(err_tau_identity)),
        ("concentration", Box::new(concentration)),
    ];
    let mut failures = 0;
    for (name, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {detail}  [{secs:.1}s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {name:<24} {detail}  [{secs:.1}s]");
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
