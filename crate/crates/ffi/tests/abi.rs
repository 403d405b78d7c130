use driftid_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn last_error() -> Option<String> {
    let p = driftid_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

#[test]
fn simulate_and_infer_round_trip() {
    unsafe {
        let mut truth = ptr::null_mut();
        assert_eq!(
            driftid_potential_two_well(8, 1.0, &mut truth),
            DriftidStatus::Ok
        );
        assert_eq!(driftid_potential_num_modes(truth), 8);

        let mut paths = ptr::null_mut();
        let status = driftid_simulate(
            truth, 5.0, 1.0, 1.0, 100, 0.0, 1.0, true, 200, 7, &mut paths,
        );
        assert_eq!(status, DriftidStatus::Ok, "{:?}", last_error());
        assert_eq!(driftid_trajectories_particles(paths), 200);
        assert_eq!(driftid_trajectories_steps(paths), 100);

        let mut buf = vec![f64::NAN; 200 * 101];
        assert_eq!(
            driftid_trajectories_copy_positions(paths, buf.as_mut_ptr(), buf.len()),
            DriftidStatus::Ok
        );
        assert!(buf.iter().all(|x| (0.0..1.0).contains(x)));

        let mut est = ptr::null_mut();
        let mut converged = false;
        let status = driftid_infer(paths, 5.0, 8, 0.0, 1.0, &mut est, &mut converged);
        assert_eq!(status, DriftidStatus::Ok, "{:?}", last_error());
        assert!(converged);
        assert!(last_error().is_none());

        let mut err = f64::NAN;
        assert_eq!(driftid_l2_error(est, truth, &mut err), DriftidStatus::Ok);
        let mut zero = ptr::null_mut();
        assert_eq!(
            driftid_potential_new([0.0].as_ptr(), [0.0].as_ptr(), 1, 1.0, &mut zero),
            DriftidStatus::Ok
        );
        let mut baseline = f64::NAN;
        assert_eq!(
            driftid_l2_error(zero, truth, &mut baseline),
            DriftidStatus::Ok
        );
        assert!(err < 0.5 * baseline, "{err} vs {baseline}");

        driftid_potential_free(zero);
        driftid_potential_free(est);
        driftid_trajectories_free(paths);
        driftid_potential_free(truth);
    }
}

#[test]
fn potential_accessors_match_the_coefficients() {
    unsafe {
        let (cos, sin) = ([0.1, 0.0, 0.02], [0.0, 0.05, 0.0]);
        let mut p = ptr::null_mut();
        assert_eq!(
            driftid_potential_new(cos.as_ptr(), sin.as_ptr(), 3, 2.0, &mut p),
            DriftidStatus::Ok
        );
        let (mut c, mut s) = ([0.0; 3], [0.0; 3]);
        assert_eq!(
            driftid_potential_coefficients(p, c.as_mut_ptr(), s.as_mut_ptr(), 3),
            DriftidStatus::Ok
        );
        assert_eq!((c, s), (cos, sin));

        let mut v = 0.0;
        assert_eq!(driftid_potential_eval(p, 0.0, &mut v), DriftidStatus::Ok);
        assert!((v - 0.12).abs() < 1e-15);

        let mut short = [0.0; 2];
        let status = driftid_potential_coefficients(p, short.as_mut_ptr(), short.as_mut_ptr(), 2);
        assert_eq!(status, DriftidStatus::InvalidArgument);
        assert!(last_error().is_some());
        driftid_potential_free(p);
    }
}

#[test]
fn bad_arguments_report_status_and_message() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            driftid_potential_two_well(8, 1.0, ptr::null_mut()),
            DriftidStatus::NullPointer
        );
        assert!(last_error().unwrap().contains("out"));

        assert_eq!(
            driftid_potential_two_well(8, -1.0, &mut p),
            DriftidStatus::InvalidArgument
        );
        assert!(p.is_null());

        let mut t = ptr::null_mut();
        let status = driftid_simulate(ptr::null(), 0.0, 1.0, 1.0, 10, 0.0, 1.0, true, 5, 1, &mut t);
        assert_eq!(status, DriftidStatus::NullPointer);

        assert_eq!(
            driftid_potential_two_well(8, 1.0, &mut p),
            DriftidStatus::Ok
        );
        assert_eq!(
            driftid_simulate(p, 0.0, -1.0, 1.0, 10, 0.0, 1.0, true, 5, 1, &mut t),
            DriftidStatus::InvalidArgument
        );
        assert_eq!(
            driftid_simulate(p, 1e7, 1.0, 1.0, 10, 0.0, 1.0, true, 5, 1, &mut t),
            DriftidStatus::Numerical
        );
        assert!(t.is_null());

        let mut slope = 0.0;
        let (n, e) = ([10.0, 100.0], [1.0, 0.3]);
        let status = driftid_fit_rate(n.as_ptr(), e.as_ptr(), 2, &mut slope, &mut 0.0, &mut 0.0);
        assert_eq!(status, DriftidStatus::InvalidArgument);

        assert_eq!(driftid_potential_num_modes(ptr::null()), 0);
        assert_eq!(driftid_trajectories_particles(ptr::null()), 0);
        driftid_potential_free(ptr::null_mut());
        driftid_trajectories_free(ptr::null_mut());
        driftid_potential_free(p);
    }
}

#[test]
fn fit_rate_recovers_a_power_law() {
    let n = [10.0, 100.0, 1000.0, 10_000.0];
    let e: Vec<f64> = n.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
    let (mut slope, mut intercept, mut residual) = (0.0, 0.0, f64::NAN);
    let status = unsafe {
        driftid_fit_rate(
            n.as_ptr(),
            e.as_ptr(),
            4,
            &mut slope,
            &mut intercept,
            &mut residual,
        )
    };
    assert_eq!(status, DriftidStatus::Ok);
    assert!((slope + 0.5).abs() < 1e-12);
    assert!((intercept - 3f64.ln()).abs() < 1e-12);
    assert!(residual < 1e-12);
}

#[test]
fn header_declares_every_entry_point() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/driftid.h")).unwrap();
    assert!(header.contains("#ifndef DRIFTID_H"));
    assert!(header.contains("typedef struct DriftidPotential DriftidPotential;"));
    assert!(header.contains("DRIFTID_STATUS_NUMERICAL = 3"));
    for f in [
        "driftid_last_error",
        "driftid_potential_new",
        "driftid_potential_two_well",
        "driftid_potential_num_modes",
        "driftid_potential_coefficients",
        "driftid_potential_eval",
        "driftid_potential_free",
        "driftid_simulate",
        "driftid_trajectories_particles",
        "driftid_trajectories_steps",
        "driftid_trajectories_copy_positions",
        "driftid_trajectories_free",
        "driftid_infer",
        "driftid_l2_error",
        "driftid_fit_rate",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
}
