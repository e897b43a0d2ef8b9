use std::f64::consts::PI;

use rollsim::drive::DriveProfile;
use rollsim::dynamics::{RobotParams, ShellState};
use rollsim::integrator::{mechanical_energy, power_terms, simulate, SimOptions, Simulator};
use rollsim::spatial::Vec3;

/// Mismatch between the energy change over a 10 s run and the integrated
/// motor, damping and external power (composite Simpson on the step grid),
/// with the energy change itself.
fn energy_gap(opts: SimOptions) -> (f64, f64) {
    let p = RobotParams::default();
    // Motor power jumps where the ramp ends, so the ramp outlasts the run.
    let drive = DriveProfile::ramp_from_rest(0.0, PI, PI / 12.0).unwrap();
    let start = ShellState::at_rest(&p, 0.0, 0.0, 0.3);
    let mut sim = Simulator::new(p, start, opts).unwrap();
    let steps = (10.0 / opts.dt).round() as u64;
    assert_eq!(steps % 2, 0);
    let power = |sim: &Simulator| {
        let (m, d, e) = power_terms(&p, sim.state(), &drive, sim.time(), &opts).unwrap();
        m + d + e
    };
    let e0 = mechanical_energy(&p, sim.state(), &drive, 0.0);
    let mut work = 0.0;
    for _ in 0..steps / 2 {
        let a = power(&sim);
        sim.advance(&drive, 1).unwrap();
        let b = power(&sim);
        sim.advance(&drive, 1).unwrap();
        let c = power(&sim);
        work += opts.dt / 3.0 * (a + 4.0 * b + c);
    }
    let e1 = mechanical_energy(&p, sim.state(), &drive, sim.time());
    ((e1 - e0) - work, e1 - e0)
}

#[test]
fn energy_audit_with_damping() {
    let (gap, change) = energy_gap(SimOptions::default());
    assert!(change.abs() > 1e-3, "energy change {change:e} J");
    assert!(gap.abs() < 1e-10, "energy gap {gap:e} J");
}

#[test]
fn energy_audit_with_external_force() {
    let opts = SimOptions {
        external_force: Vec3::new(0.05, -0.03, 0.0),
        ..SimOptions::default()
    };
    let (gap, _) = energy_gap(opts);
    assert!(gap.abs() < 1e-10, "energy gap {gap:e} J");
}

/// Final-state differences between successive step halvings.
fn richardson_ratio(dt: f64) -> f64 {
    let p = RobotParams::default();
    let drive = DriveProfile::constant(0.0, 2.0 * PI);
    let start = ShellState::at_rest(&p, 0.0, 0.0, 0.0);
    let run = |h: f64| {
        let opts = SimOptions {
            dt: h,
            output_stride: 2.0,
            ..SimOptions::default()
        };
        *simulate(&p, &start, &drive, 2.0, &opts).unwrap().last()
    };
    let [a, b, c] = [run(dt), run(dt / 2.0), run(dt / 4.0)];
    let diff = |x: &rollsim::integrator::TrajectorySample,
                y: &rollsim::integrator::TrajectorySample| {
        ((x.state.orientation - y.state.orientation)
            .frobenius_norm()
            .powi(2)
            + (x.state.omega - y.state.omega).norm_squared()
            + (x.state.center - y.state.center).norm_squared())
        .sqrt()
    };
    diff(&a, &b) / diff(&b, &c)
}

#[test]
fn fourth_order_self_convergence() {
    let ratio = richardson_ratio(0.01);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}
