use std::f64::consts::PI;

use shocklayer::postprocess::{closed_form_fields, EndpointRole};
use shocklayer::solver::default_continuation_steps;
use shocklayer::{
    continuation_solve, integrate_trajectory, recover_fields, Execution, FieldProfile,
    NewtonConfig, ProblemConfig, RecoveryOptions, Termination, TrajectoryOptions,
};

fn profile(theta0: f64, alpha0: f64, n: usize) -> FieldProfile {
    let cfg = ProblemConfig::hypersonic(theta0, alpha0, n).unwrap();
    let steps = default_continuation_steps(alpha0);
    let (b, _) = continuation_solve(&cfg, steps, &NewtonConfig::default()).unwrap();
    recover_fields(&b, &cfg, &RecoveryOptions::default(), Execution::Parallel).unwrap()
}

fn at(p: &FieldProfile, phi: f64) -> usize {
    let m = p.len() as f64;
    (((phi + PI) / (2.0 * PI) * m).round() as usize) % p.len()
}

#[test]
fn layer_density_trend_in_attack_angle() {
    let alphas = [PI / 72.0, PI / 36.0, PI / 18.0, PI / 12.0];
    let profs: Vec<FieldProfile> = alphas.iter().map(|&a| profile(PI / 6.0, a, 8)).collect();
    for w in profs.windows(2) {
        for phi in [PI - 0.06, -(PI - 0.06)] {
            assert!(w[1].w_rho[at(&w[1], phi)] > w[0].w_rho[at(&w[0], phi)]);
        }
        for phi in [0.06, -0.06] {
            assert!(w[1].w_rho[at(&w[1], phi)] < w[0].w_rho[at(&w[0], phi)]);
        }
    }
}

#[test]
fn fields_are_physical_on_the_valid_mask() {
    let p = profile(PI / 6.0, PI / 36.0, 8);
    let mut checked = 0;
    for i in (0..p.len()).filter(|&i| p.valid[i]) {
        assert!(p.w[i] > 0.0 && p.w_rho[i] > 0.0 && p.wc[i] > 0.0);
        if p.phi[i] > 0.0 {
            assert!(p.ut[i] < 0.0);
        } else {
            assert!(p.ut[i] > 0.0);
        }
        checked += 1;
    }
    assert!(checked > p.len() * 9 / 10);
    assert!(!p.valid[0] && !p.valid[p.len() / 2]);
}

#[test]
fn singular_limits_match_neighbours() {
    let p = profile(PI / 6.0, PI / 36.0, 8);
    let src = p
        .singular_points
        .iter()
        .find(|s| s.role == EndpointRole::Source)
        .unwrap();
    assert!(src.exponent > 1.0);
    // the limit value at the windward point continues the neighbouring samples
    let (w0, w1) = (p.w_rho[0], p.w_rho[1]);
    assert!((w0 - w1).abs() < 1e-2 * w0, "{w0} {w1}");
}

#[test]
fn sequential_and_parallel_recovery_agree() {
    let cfg = ProblemConfig::hypersonic(PI / 5.0, PI / 24.0, 8).unwrap();
    let (b, _) = continuation_solve(&cfg, 3, &NewtonConfig::default()).unwrap();
    let o = RecoveryOptions::default();
    let s = recover_fields(&b, &cfg, &o, Execution::Sequential).unwrap();
    let q = recover_fields(&b, &cfg, &o, Execution::Parallel).unwrap();
    assert_eq!(s, q);
}

#[test]
fn closed_form_profile_refuses_trajectories() {
    let cfg = ProblemConfig::hypersonic(PI / 6.0, 0.0, 8).unwrap();
    let p = closed_form_fields(&cfg, 64);
    assert!(integrate_trajectory(
        &p,
        cfg.theta0,
        -1.0,
        1.0,
        0.0,
        &TrajectoryOptions::default()
    )
    .is_err());
}

#[test]
fn trajectories_flow_leeward_and_grow() {
    let p = profile(PI / 6.0, PI / 36.0, 8);
    for phi0 in [-0.999 * PI, -0.75 * PI, -0.5 * PI] {
        let t = integrate_trajectory(&p, PI / 6.0, phi0, 10.0, 0.0, &TrajectoryOptions::default())
            .unwrap();
        assert_eq!(t.termination, Termination::SingularWindow);
        assert!(t
            .samples
            .windows(2)
            .all(|w| w[1].1 > w[0].1 && w[1].0 > w[0].0));
        let last = t.samples.last().unwrap();
        assert!((last.0 + p.window).abs() < 1e-12);
        let xyz = t.cartesian();
        let (r, ph) = (t.samples[1].1, t.samples[1].0);
        assert!((xyz[1][0] - r * (PI / 6.0).cos()).abs() < 1e-12);
        assert!((xyz[1][2] - r * (PI / 6.0).sin() * ph.sin()).abs() < 1e-12);
    }
}
