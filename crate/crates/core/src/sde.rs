//! Euler–Maruyama simulation of independent particles on an interval.
//!
//! Every particle owns its random stream: particle `j` draws from a ChaCha
//! generator seeded with the run seed and switched to stream `j`, so the
//! output is bit-identical whatever the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::potential::DriftSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Periodic,
    Reflecting,
}

/// Interval `[a, b]` with its boundary behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainJson")]
pub struct Domain {
    a: f64,
    b: f64,
    mode: BoundaryMode,
}

#[derive(Deserialize)]
struct DomainJson {
    a: f64,
    b: f64,
    mode: BoundaryMode,
}

impl TryFrom<DomainJson> for Domain {
    type Error = Error;
    fn try_from(d: DomainJson) -> Result<Self> {
        Domain::new(d.a, d.b, d.mode)
    }
}

impl Domain {
    pub fn new(a: f64, b: f64, mode: BoundaryMode) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!("domain needs a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b, mode })
    }

    pub fn unit(mode: BoundaryMode) -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            mode,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }
}

/// Maps a raw Euler–Maruyama position back into the domain.
///
/// Periodic domains wrap into `[a, b)`; reflecting domains fold the position
/// by mirror reflection (any number of times) into `[a, b]`. Positions more
/// than ten domain lengths from the midpoint are rejected.
pub fn apply_boundary(x: f64, domain: &Domain) -> Result<f64> {
    let len = domain.length();
    let mid = 0.5 * (domain.a + domain.b);
    if !((x - mid).abs() < 10.0 * len) {
        return Err(Error::StepSize {
            position: x,
            a: domain.a,
            b: domain.b,
        });
    }
    if domain.contains(x) && (domain.mode == BoundaryMode::Reflecting || x < domain.b) {
        return Ok(x);
    }
    let y = match domain.mode {
        BoundaryMode::Periodic => {
            let r = (x - domain.a).rem_euclid(len);
            // rem_euclid can round up to exactly len
            if r >= len {
                0.0
            } else {
                r
            }
        }
        BoundaryMode::Reflecting => {
            let r = (x - domain.a).rem_euclid(2.0 * len);
            if r > len {
                2.0 * len - r
            } else {
                r
            }
        }
    };
    Ok((domain.a + y).clamp(domain.a, domain.b))
}

/// Observation times `0 = t_0 < t_1 < ... < t_M = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleJson")]
pub struct TimeSchedule {
    times: Vec<f64>,
}

#[derive(Deserialize)]
struct ScheduleJson {
    times: Vec<f64>,
}

impl TryFrom<ScheduleJson> for TimeSchedule {
    type Error = Error;
    fn try_from(s: ScheduleJson) -> Result<Self> {
        TimeSchedule::new(s.times)
    }
}

impl TimeSchedule {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Config("a schedule needs at least two times".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Config(format!(
                "schedule must start at 0, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::Config(
                "schedule times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times })
    }

    /// `M` equal steps on `[0, T]`.
    pub fn uniform(final_time: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(final_time > 0.0) {
            return Err(Error::Config(format!(
                "uniform schedule needs T > 0 and M >= 1, got T = {final_time}, M = {steps}"
            )));
        }
        let dt = final_time / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        times[steps] = final_time;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of steps `M`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.steps()]
    }

    pub fn dt(&self, step: usize) -> f64 {
        self.times[step + 1] - self.times[step]
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }

    pub fn is_uniform(&self) -> bool {
        let dt0 = self.dt(0);
        self.increments().all(|dt| (dt - dt0).abs() <= 1e-12 * dt0)
    }
}

/// Law of the initial positions. JSON form:
/// `{"kind": "uniform", "lo", "hi"}` or `{"kind": "gridded", "lo", "hi", "density"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "InitialJson")]
pub enum InitialLaw {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Piecewise-constant density on equal cells covering `[lo, hi]`.
    Gridded {
        lo: f64,
        hi: f64,
        density: Vec<f64>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum InitialJson {
    Uniform { lo: f64, hi: f64 },
    Gridded { lo: f64, hi: f64, density: Vec<f64> },
}

impl TryFrom<InitialJson> for InitialLaw {
    type Error = Error;
    fn try_from(j: InitialJson) -> Result<Self> {
        match j {
            InitialJson::Uniform { lo, hi } => InitialLaw::uniform(lo, hi),
            InitialJson::Gridded { lo, hi, density } => InitialLaw::gridded(lo, hi, density),
        }
    }
}

impl InitialLaw {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Config(format!(
                "uniform law needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self::Uniform { lo, hi })
    }

    /// Normalizes `density` so that its cell integral is one.
    pub fn gridded(lo: f64, hi: f64, density: Vec<f64>) -> Result<Self> {
        if !(lo < hi) || density.is_empty() {
            return Err(Error::Config(
                "gridded law needs lo < hi and at least one cell".into(),
            ));
        }
        if density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::Config(
                "gridded density must be finite and nonnegative".into(),
            ));
        }
        let h = (hi - lo) / density.len() as f64;
        let mass: f64 = density.iter().sum::<f64>() * h;
        if !(mass > 0.0) {
            return Err(Error::Config("gridded density has zero mass".into()));
        }
        Ok(Self::Gridded {
            lo,
            hi,
            density: density.into_iter().map(|d| d / mass).collect(),
        })
    }

    fn support(&self) -> (f64, f64) {
        match self {
            InitialLaw::Uniform { lo, hi } | InitialLaw::Gridded { lo, hi, .. } => (*lo, *hi),
        }
    }

    pub fn check_support(&self, domain: &Domain) -> Result<()> {
        let (lo, hi) = self.support();
        if lo < domain.a || hi > domain.b {
            return Err(Error::Config(format!(
                "initial law support [{lo}, {hi}] is not inside [{}, {}]",
                domain.a, domain.b
            )));
        }
        Ok(())
    }

    /// Density at `x` (zero outside the support).
    pub fn density(&self, x: f64) -> f64 {
        match self {
            InitialLaw::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            InitialLaw::Gridded { lo, hi, density } => {
                if x < *lo || x > *hi {
                    return 0.0;
                }
                let h = (hi - lo) / density.len() as f64;
                let i = (((x - lo) / h) as usize).min(density.len() - 1);
                density[i]
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InitialLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            InitialLaw::Gridded { lo, hi, density } => {
                let h = (hi - lo) / density.len() as f64;
                let target = rng.random::<f64>();
                let mut acc = 0.0;
                let mut cell = density.len() - 1;
                for (i, d) in density.iter().enumerate() {
                    acc += d * h;
                    if target < acc {
                        cell = i;
                        break;
                    }
                }
                lo + h * (cell as f64 + rng.random::<f64>())
            }
        }
    }
}

/// Random stream of particle `index` under run seed `seed`.
pub fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `n` independent draws from `law`; draw `j` uses the stream of particle `j`.
pub fn sample_initial(law: &InitialLaw, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("need at least one particle".into()));
    }
    Ok((0..n)
        .map(|j| law.sample(&mut particle_rng(seed, j)))
        .collect())
}

/// Simulated particle paths observed at the schedule times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    positions: Vec<f64>,
    particles: usize,
    schedule: TimeSchedule,
    sigma: f64,
    seed: u64,
    domain: Domain,
}

/// Run metadata stored next to the trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub sigma: f64,
    pub seed: u64,
    pub domain: Domain,
    pub schedule: TimeSchedule,
}

impl TrajectorySet {
    /// Assembles a set from row-major positions (`particles × (M+1)`).
    pub fn from_positions(
        positions: Vec<f64>,
        particles: usize,
        schedule: TimeSchedule,
        sigma: f64,
        seed: u64,
        domain: Domain,
    ) -> Result<Self> {
        if positions.len() != particles * (schedule.steps() + 1) {
            return Err(Error::Dimension(format!(
                "{} positions do not fill {} particles × {} times",
                positions.len(),
                particles,
                schedule.steps() + 1
            )));
        }
        if !(sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if let Some(x) = positions.iter().find(|x| !domain.contains(**x)) {
            return Err(Error::Domain(format!(
                "position {x} lies outside [{}, {}]",
                domain.a, domain.b
            )));
        }
        Ok(Self {
            positions,
            particles,
            schedule,
            sigma,
            seed,
            domain,
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn is_empty(&self) -> bool {
        self.particles == 0
    }

    pub fn schedule(&self) -> &TimeSchedule {
        &self.schedule
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Path `q_j = (q_j^0, ..., q_j^M)`.
    pub fn path(&self, j: usize) -> &[f64] {
        let w = self.schedule.steps() + 1;
        &self.positions[j * w..(j + 1) * w]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.schedule.steps() + 1)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Concatenates two sets recorded under the same schedule and domain.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.schedule != other.schedule
            || self.domain != other.domain
            || self.sigma != other.sigma
        {
            return Err(Error::Dimension(
                "trajectory sets are not compatible".into(),
            ));
        }
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        Ok(Self {
            positions,
            particles: self.particles + other.particles,
            ..self.clone()
        })
    }

    /// Keeps the paths with the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut positions = Vec::with_capacity(indices.len() * (self.schedule.steps() + 1));
        for &j in indices {
            positions.extend_from_slice(self.path(j));
        }
        Self {
            positions,
            particles: indices.len(),
            ..self.clone()
        }
    }

    pub fn meta(&self) -> TrajectoryMeta {
        TrajectoryMeta {
            sigma: self.sigma,
            seed: self.seed,
            domain: self.domain,
            schedule: self.schedule.clone(),
        }
    }

    /// Writes `particle,step,time,position`, one row per observation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["particle", "step", "time", "position"])?;
        for (j, path) in self.paths().enumerate() {
            for (i, x) in path.iter().enumerate() {
                w.serialize((j, i, self.schedule.times[i], x))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`Self::write_csv`]; rows may come in any order.
    pub fn read_csv<R: Read>(reader: R, meta: &TrajectoryMeta) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            particle: usize,
            step: usize,
            time: f64,
            position: f64,
        }
        let width = meta.schedule.steps() + 1;
        let mut rows: Vec<Row> = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            rows.push(row?);
        }
        let particles = rows.iter().map(|r| r.particle + 1).max().unwrap_or(0);
        if rows.len() != particles * width {
            return Err(Error::Dimension(format!(
                "expected {} rows for {} particles, found {}",
                particles * width,
                particles,
                rows.len()
            )));
        }
        let mut positions = vec![f64::NAN; particles * width];
        for r in rows {
            if r.step >= width {
                return Err(Error::Dimension(format!(
                    "step {} exceeds schedule",
                    r.step
                )));
            }
            let expected = meta.schedule.times[r.step];
            if (r.time - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(Error::Config(format!(
                    "row time {} disagrees with schedule time {expected}",
                    r.time
                )));
            }
            positions[r.particle * width + r.step] = r.position;
        }
        if positions.iter().any(|x| x.is_nan()) {
            return Err(Error::Dimension(
                "trajectory CSV has missing or duplicate rows".into(),
            ));
        }
        Self::from_positions(
            positions,
            particles,
            meta.schedule.clone(),
            meta.sigma,
            meta.seed,
            meta.domain,
        )
    }
}

/// Simulates `n` particles with the Euler–Maruyama update
/// `q^{i+1} = B(q^i + Δt_i μ(q^i) + σ √Δt_i ξ)` where `B` is [`apply_boundary`].
pub fn simulate_trajectories(
    drift: &DriftSpec,
    sigma: f64,
    schedule: &TimeSchedule,
    law: &InitialLaw,
    domain: &Domain,
    n: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if n == 0 {
        return Err(Error::Config("need at least one particle".into()));
    }
    law.check_support(domain)?;
    drift.check_domain(domain)?;
    let width = schedule.steps() + 1;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = particle_rng(seed, j);
            let mut path = Vec::with_capacity(width);
            let mut x = law.sample(&mut rng);
            path.push(x);
            for dt in schedule.increments() {
                let xi: f64 = rng.sample(StandardNormal);
                x = apply_boundary(x + dt * drift.eval(x) + sigma * dt.sqrt() * xi, domain)?;
                path.push(x);
            }
            Ok(path)
        })
        .collect::<Result<_>>()?;
    let positions = rows.concat();
    TrajectorySet::from_positions(positions, n, schedule.clone(), sigma, seed, *domain)
}

/// The empirical measure `Gⁿ = (1/n) Σ_j δ_{q_j}` on `Ω^{M+1}`.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalMeasure<'a> {
    data: &'a TrajectorySet,
}

pub fn empirical_measure(data: &TrajectorySet) -> EmpiricalMeasure<'_> {
    EmpiricalMeasure { data }
}

impl<'a> EmpiricalMeasure<'a> {
    pub fn len(&self) -> usize {
        self.data.particles()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.data.particles() as f64
    }

    pub fn points(&self) -> impl Iterator<Item = &'a [f64]> {
        self.data.paths()
    }

    /// `∫ f dGⁿ = (1/n) Σ_j f(q_j)`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points().map(f).sum::<f64>() * self.weight()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::FourierPotential;

    #[test]
    fn boundary_examples() {
        let refl = Domain::unit(BoundaryMode::Reflecting);
        let per = Domain::unit(BoundaryMode::Periodic);
        assert!((apply_boundary(1.05, &refl).unwrap() - 0.95).abs() < 1e-15);
        assert!((apply_boundary(-0.2, &refl).unwrap() - 0.2).abs() < 1e-15);
        assert!((apply_boundary(1.05, &per).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(apply_boundary(1.0, &per).unwrap(), 0.0);
        assert_eq!(apply_boundary(1.0, &refl).unwrap(), 1.0);
    }

    #[test]
    fn reflecting_fold_handles_multiple_lengths() {
        let refl = Domain::new(-1.0, 1.0, BoundaryMode::Reflecting).unwrap();
        // 4.5 -> overshoot 3.5 past b: fold twice
        assert!((apply_boundary(4.5, &refl).unwrap() - 0.5).abs() < 1e-14);
        assert!((apply_boundary(-3.25, &refl).unwrap() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn pathological_step_is_rejected() {
        let per = Domain::unit(BoundaryMode::Periodic);
        assert!(matches!(
            apply_boundary(11.0, &per),
            Err(Error::StepSize { .. })
        ));
        assert!(matches!(
            apply_boundary(f64::NAN, &per),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn schedule_validation() {
        assert!(TimeSchedule::new(vec![0.0]).is_err());
        assert!(TimeSchedule::new(vec![0.1, 0.2]).is_err());
        assert!(TimeSchedule::new(vec![0.0, 0.2, 0.2]).is_err());
        let s = TimeSchedule::uniform(1.0, 100).unwrap();
        assert_eq!(s.steps(), 100);
        assert_eq!(s.final_time(), 1.0);
        assert!(s.is_uniform());
    }

    #[test]
    fn initial_sampling_is_reproducible_and_in_support() {
        let law = InitialLaw::uniform(0.0, 1.0).unwrap();
        let a = sample_initial(&law, 4, 17).unwrap();
        let b = sample_initial(&law, 4, 17).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(sample_initial(&law, 0, 1).is_err());
        let outside = InitialLaw::uniform(-0.5, 1.0).unwrap();
        assert!(outside
            .check_support(&Domain::unit(BoundaryMode::Periodic))
            .is_err());
    }

    #[test]
    fn deterministic_transport_without_noise() {
        let drift = DriftSpec::new(FourierPotential::zeros(2, 1.0).unwrap(), 1.0).unwrap();
        let sched = TimeSchedule::uniform(0.5, 5).unwrap();
        let law = InitialLaw::gridded(0.0, 1.0, vec![1.0; 8]).unwrap();
        let dom = Domain::unit(BoundaryMode::Periodic);
        // start exactly at zero through a degenerate uniform law
        let zero = InitialLaw::Uniform { lo: 0.0, hi: 0.0 };
        let ts = simulate_trajectories(&drift, 1e-12, &sched, &zero, &dom, 1, 3).unwrap();
        for (i, x) in ts.path(0).iter().enumerate() {
            assert!((x - 0.1 * i as f64).abs() < 1e-6, "step {i}: {x}");
        }
        assert!(simulate_trajectories(&drift, 0.0, &sched, &law, &dom, 1, 3).is_err());
    }

    #[test]
    fn csv_layout_and_reload() {
        let drift = DriftSpec::new(FourierPotential::two_well(3, 1.0).unwrap(), 5.0).unwrap();
        let sched = TimeSchedule::uniform(1.0, 4).unwrap();
        let law = InitialLaw::uniform(0.0, 1.0).unwrap();
        let dom = Domain::unit(BoundaryMode::Periodic);
        let ts = simulate_trajectories(&drift, 1.0, &sched, &law, &dom, 3, 9).unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("particle,step,time,position"));
        assert_eq!(lines.count(), 3 * 5);
        let back = TrajectorySet::read_csv(&buf[..], &ts.meta()).unwrap();
        assert_eq!(back, ts);
        let meta_json = serde_json::to_string(&ts.meta()).unwrap();
        let meta: TrajectoryMeta = serde_json::from_str(&meta_json).unwrap();
        assert_eq!(meta, ts.meta());
    }

    #[test]
    fn empirical_measure_basics() {
        let sched = TimeSchedule::uniform(1.0, 2).unwrap();
        let dom = Domain::unit(BoundaryMode::Periodic);
        let ts = TrajectorySet::from_positions(
            vec![0.1, 0.2, 0.3, 0.5, 0.6, 0.7],
            2,
            sched.clone(),
            1.0,
            0,
            dom,
        )
        .unwrap();
        let g = empirical_measure(&ts);
        assert_eq!(g.integrate(|_| 1.0), 1.0);
        assert!((g.integrate(|q| q[0]) - 0.3).abs() < 1e-15);
        let one = ts.select(&[1]);
        assert_eq!(empirical_measure(&one).integrate(|q| q[2] * 2.0), 1.4);
    }
}
