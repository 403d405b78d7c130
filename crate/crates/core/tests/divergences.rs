use driftid::divergences::{
    err_tau, kl_divergence, kl_divergence_values, kl_l2_bound_check, kl_pi_tau, product_density,
    random_density, random_kernel_stack, s_tau_density, sample_points,
};
use driftid::fokker_planck::{DensityField, SpatialGrid};
use driftid::stats::{loglog_fit, median};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(cells: usize) -> SpatialGrid {
    SpatialGrid::new(0.0, 1.0, cells).unwrap()
}

fn l1(a: &DensityField, b: &DensityField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        * a.grid().dx()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kl_is_nonnegative(seed in any::<u64>(), tau in 0.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid(64);
        let z = random_density(&g, 3, 0.01, &mut rng).unwrap();
        let u = random_density(&g, 3, 0.01, &mut rng).unwrap();
        prop_assert!(kl_divergence(&z, &u, tau).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&u, &u, tau).unwrap() == 0.0);
    }

    #[test]
    fn kl_vanishes_exactly_for_equal_arguments(seed in any::<u64>(), far in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid(64);
        let u = random_density(&g, 3, 0.05, &mut rng).unwrap();
        let w = random_density(&g, 3, 0.05, &mut rng).unwrap();
        let mix = if far { 0.3 } else { 1e-9 };
        let z = DensityField::new(
            g,
            u.values().iter().zip(w.values()).map(|(a, b)| (1.0 - mix) * a + mix * b).collect(),
        )
        .unwrap();
        let kl = kl_divergence(&z, &u, 0.0).unwrap();
        let dist = l1(&z, &u);
        prop_assume!(!far || dist > 1e-3);
        prop_assert_eq!(kl < 1e-10, dist < 1e-5, "kl {} l1 {}", kl, dist);
    }
}

#[test]
fn shifted_kl_decreases_with_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = grid(24);
    for _ in 0..20 {
        let g0 = random_density(&g, 2, 0.05, &mut rng).unwrap();
        let z = random_kernel_stack(&g, 1, 2, 0.05, false, &mut rng).unwrap();
        let u = random_kernel_stack(&g, 1, 2, 0.05, false, &mut rng).unwrap();
        let values: Vec<f64> = [0.0, 0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|t| kl_pi_tau(&z, &u, &g0, *t).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }
}

#[test]
fn one_step_kl_is_the_kl_of_the_joint_densities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = grid(20);
    let n = g.len();
    let g0 = random_density(&g, 2, 0.05, &mut rng).unwrap();
    let z = random_kernel_stack(&g, 1, 2, 0.05, false, &mut rng).unwrap();
    let u = random_kernel_stack(&g, 1, 2, 0.05, false, &mut rng).unwrap();
    // joint density g⁰(x⁰) k(x¹, x⁰), with x⁰ the slow index
    let joint = |k: &[f64]| -> Vec<f64> {
        (0..n * n)
            .map(|c| g0.values()[c / n] * k[(c % n) * n + c / n])
            .collect()
    };
    let expected = kl_divergence_values(
        &joint(z.kernel(0)),
        &joint(u.kernel(0)),
        g.dx() * g.dx(),
        0.3,
    )
    .unwrap();
    let got = kl_pi_tau(&z, &u, &g0, 0.3).unwrap();
    assert!(
        (got - expected).abs() <= 1e-12 * expected,
        "{got} vs {expected}"
    );
}

#[test]
fn product_density_mass_and_marginal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (cells, m) in [(64, 1), (24, 2)] {
        let g = grid(cells);
        let g0 = random_density(&g, 2, 0.05, &mut rng).unwrap();
        let stack = random_kernel_stack(&g, m, 2, 0.05, false, &mut rng).unwrap();
        let p = product_density(&g0, &stack).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-8);
        let marginal = p.marginal_first();
        let worst = marginal
            .iter()
            .zip(g0.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "M={m}: {worst}");
    }
}

#[test]
fn unshifted_fidelity_is_the_plain_log_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = grid(32);
    let g0 = random_density(&g, 2, 0.05, &mut rng).unwrap();
    let y = random_kernel_stack(&g, 1, 2, 0.05, false, &mut rng).unwrap();
    let p = product_density(&g0, &y).unwrap();
    let points = sample_points(&p, 200, &mut rng).unwrap();
    let nll = -points.iter().map(|q| p.eval(q).unwrap().ln()).sum::<f64>() / points.len() as f64;
    let s = s_tau_density(&y, &points, &g0, 0.0).unwrap();
    assert!((s - nll).abs() < 1e-12 * nll.abs().max(1.0));
    assert!(s_tau_density(&y, &points, &g0, 0.5).unwrap().is_finite());
}

#[test]
fn err_tau_vanishes_at_the_truth_and_bound_is_tight_at_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = grid(32);
    let g0 = random_density(&g, 2, 0.05, &mut rng).unwrap();
    let gdag = random_kernel_stack(&g, 1, 2, 0.05, false, &mut rng).unwrap();
    let points = sample_points(&product_density(&g0, &gdag).unwrap(), 100, &mut rng).unwrap();
    let e = err_tau(&gdag, &gdag, &points, &g0, 0.1).unwrap();
    assert_eq!(e.direct, 0.0);
    assert!(e.composed.abs() < 1e-12);
    let m = kl_l2_bound_check(&gdag, &gdag, &g0, 0.1).unwrap();
    assert_eq!((m.lhs, m.rhs, m.margin), (0.0, 0.0, 0.0));
}

#[test]
fn err_tau_shrinks_like_inverse_root_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = grid(32);
    let g0 = random_density(&g, 2, 0.05, &mut rng).unwrap();
    let gdag = random_kernel_stack(&g, 1, 2, 0.05, false, &mut rng).unwrap();
    let y = random_kernel_stack(&g, 1, 2, 0.05, false, &mut rng).unwrap();
    let gp = product_density(&g0, &gdag).unwrap();
    let ns = [100.0, 1000.0, 10_000.0];
    let medians: Vec<f64> = ns
        .iter()
        .map(|n| {
            let errs: Vec<f64> = (0..60)
                .map(|_| {
                    let pts = sample_points(&gp, *n as usize, &mut rng).unwrap();
                    err_tau(&y, &gdag, &pts, &g0, 0.1).unwrap().direct.abs()
                })
                .collect();
            median(&errs)
        })
        .collect();
    let slope = loglog_fit(&ns, &medians).unwrap().slope;
    assert!(
        (-0.65..=-0.35).contains(&slope),
        "slope {slope}, medians {medians:?}"
    );
}
