//! Linear stability of steady revolving motion.
//!
//! In a frame revolving at Ω the steady motion is stationary, so small
//! deviations obey a time-invariant linear system. The deviation is a
//! rotation vector `a` applied to the orientation at t = 0 in that frame,
//! `C = exp(a)·T₀`, together with its rate `v`; the shell spin `ω₀` is
//! factored out, which is why the pendulum stays at its steady phase. The
//! second-order dynamics of `a` are linearised by central differences and
//! put in companion form `[[0, I], [A, B]]`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drive::DriveProfile;
use crate::dynamics::{
    angular_acceleration, damping_torque, pendulum_kinematics, RobotParams, ShellState,
};
use crate::eigen::{eigenvalues, eigenvector, SquareMatrix};
use crate::error::{Error, Result};
use crate::integrator::{SimOptions, Simulator};
use crate::quasistatic::{ansatz_omega, Branch, QuasiStaticState, RESIDUAL_TOLERANCE};
use crate::spatial::{rotation_from_vector, rotation_vector, rotation_y, rotation_z, Vec3};

/// Finite-difference step for the linearisation (rad and rad/s).
pub const LINEARIZATION_STEP: f64 = 1e-6;
/// Eigenvalues with |Re| below this are candidates for the symmetry mode (1/s).
pub const TRIVIAL_THRESHOLD: f64 = 1e-6;

/// Rate of change of the deviation rate `v` at deviation `(a, v)`.
fn deviation_acceleration(
    p: &RobotParams,
    qs: &QuasiStaticState,
    a: Vec3,
    v: Vec3,
) -> Result<Vec3> {
    let c = rotation_from_vector(a) * rotation_y(qs.axis_tilt);
    let axis = c * Vec3::Z;
    let spin = Vec3::Z * qs.revolve_rate;
    let omega = v + spin - axis * qs.drive_speed;
    let st = ShellState {
        orientation: c,
        omega,
        center: Vec3::new(0.0, 0.0, p.radius),
        theta: qs.pendulum_phase,
        theta_dot: qs.drive_speed,
    };
    let mk = pendulum_kinematics(p, qs.pendulum_phase, qs.drive_speed, 0.0);
    let omega_dot = angular_acceleration(p, &st, &[mk], Vec3::ZERO, damping_torque(p, omega))?;
    // ω̇ seen in the revolving frame, minus the rate of the factored-out spin
    Ok(omega_dot - spin.cross(omega) + v.cross(axis) * qs.drive_speed)
}

fn check_converged(qs: &QuasiStaticState) -> Result<()> {
    if qs.branch != Branch::Normal {
        return Err(Error::InvalidState(
            "stability is analysed on the normal branch only".into(),
        ));
    }
    if !(qs.residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::InvalidState(format!(
            "quasi-static state not converged (residual {:e})",
            qs.residual
        )));
    }
    Ok(())
}

/// Companion-form matrix over `(a, v)` with a chosen difference step.
pub fn linearize_with_step(
    p: &RobotParams,
    qs: &QuasiStaticState,
    step: f64,
) -> Result<SquareMatrix> {
    check_converged(qs)?;
    let mut m = SquareMatrix::zeros(6);
    for i in 0..3 {
        m[(i, i + 3)] = 1.0;
    }
    for col in 0..6 {
        let mut e = [0.0; 6];
        e[col] = step;
        let split = |x: [f64; 6]| (Vec3::new(x[0], x[1], x[2]), Vec3::new(x[3], x[4], x[5]));
        let (ap, vp) = split(e);
        let (am, vm) = split(e.map(|x| -x));
        let d = (deviation_acceleration(p, qs, ap, vp)? - deviation_acceleration(p, qs, am, vm)?)
            * (0.5 / step);
        for row in 0..3 {
            m[(row + 3, col)] = d[row];
        }
    }
    Ok(m)
}

pub fn linearize(p: &RobotParams, qs: &QuasiStaticState) -> Result<SquareMatrix> {
    linearize_with_step(p, qs, LINEARIZATION_STEP)
}

pub fn spectrum(m: &SquareMatrix) -> Result<Vec<Complex64>> {
    eigenvalues(m)
}

/// Index of the symmetry mode, recovery time and stability flag.
pub fn recovery(eigenvalues: &[Complex64]) -> Result<(usize, f64, bool)> {
    if eigenvalues.is_empty() {
        return Err(Error::DegenerateInput("no eigenvalues".into()));
    }
    let near_zero: Vec<usize> = (0..eigenvalues.len())
        .filter(|&k| eigenvalues[k].re.abs() < TRIVIAL_THRESHOLD)
        .collect();
    if near_zero.len() > 1 {
        let a = eigenvalues[near_zero[0]];
        let b = eigenvalues[near_zero[1]];
        return Err(Error::AmbiguousTrivialMode(a.to_string(), b.to_string()));
    }
    let trivial = (0..eigenvalues.len())
        .min_by(|&i, &j| eigenvalues[i].re.abs().total_cmp(&eigenvalues[j].re.abs()))
        .unwrap();
    let dominant = eigenvalues
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != trivial)
        .map(|(_, l)| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((trivial, -1.0 / dominant, dominant < 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub drive_speed: f64,
    /// Sorted by decreasing real part.
    pub eigenvalues: Vec<Complex64>,
    pub trivial_mode_index: usize,
    /// `|⟨v, (ẑ, 0)⟩|` for the unit eigenvector of the symmetry mode.
    pub trivial_alignment: f64,
    /// Recovery time `−1/Re λ₂` (s).
    pub tau: f64,
    pub stable: bool,
}

impl StabilityReport {
    /// Slowest non-trivial eigenvalue, with non-negative imaginary part.
    pub fn dominant(&self) -> Complex64 {
        let l = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != self.trivial_mode_index)
            .map(|(_, l)| *l)
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .unwrap();
        if l.im < 0.0 {
            l.conj()
        } else {
            l
        }
    }
}

pub fn analyze(p: &RobotParams, qs: &QuasiStaticState) -> Result<StabilityReport> {
    let m = linearize(p, qs)?;
    let eigenvalues = spectrum(&m)?;
    let (trivial_mode_index, tau, stable) = recovery(&eigenvalues)?;
    let v = eigenvector(&m, eigenvalues[trivial_mode_index])?;
    Ok(StabilityReport {
        drive_speed: qs.drive_speed,
        trivial_alignment: v[2].norm(),
        eigenvalues,
        trivial_mode_index,
        tau,
        stable,
    })
}

/// Reports for every state, in parallel; failures are collected per speed.
pub fn sweep(p: &RobotParams, states: &[QuasiStaticState]) -> Result<Vec<StabilityReport>> {
    let results: Vec<(f64, Result<StabilityReport>)> = states
        .par_iter()
        .map(|qs| (qs.drive_speed, analyze(p, qs)))
        .collect();
    let mut reports = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (w, r) in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => failures.push((w, e)),
        }
    }
    if failures.is_empty() {
        Ok(reports)
    } else {
        Err(Error::SweepFailures(failures))
    }
}

pub const EIGENVALUE_CSV_HEADER: [&str; 5] = ["omega0", "mode", "re", "im", "trivial"];
pub const SUMMARY_CSV_HEADER: [&str; 5] = ["omega0", "tau", "stable", "lambda2_re", "lambda2_im"];

/// Eigenvalue locus in long format, one row per mode.
pub fn write_eigenvalue_csv<W: Write>(reports: &[StabilityReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EIGENVALUE_CSV_HEADER)?;
    for r in reports {
        for (k, l) in r.eigenvalues.iter().enumerate() {
            w.write_record([
                r.drive_speed.to_string(),
                k.to_string(),
                l.re.to_string(),
                l.im.to_string(),
                (k == r.trivial_mode_index).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(reports: &[StabilityReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_CSV_HEADER)?;
    for r in reports {
        let d = r.dominant();
        w.write_record([
            r.drive_speed.to_string(),
            r.tau.to_string(),
            r.stable.to_string(),
            d.re.to_string(),
            d.im.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Decay and oscillation of a small deviation followed in the full simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResponse {
    /// Fitted decay rate of the envelope (1/s, negative when decaying).
    pub decay_rate: f64,
    /// Fitted angular frequency (rad/s).
    pub frequency: f64,
    /// The linear prediction `λ₂`.
    pub predicted: Complex64,
}

/// Starts the full simulation on the steady state displaced along the real
/// part of the dominant mode (tilt deviation of size `amplitude`), and fits
/// the envelope and zero-crossing rate of the horizontal tilt deviation.
pub fn perturbation_response(
    p: &RobotParams,
    qs: &QuasiStaticState,
    amplitude: f64,
    duration: f64,
    opts: &SimOptions,
) -> Result<PerturbationResponse> {
    let m = linearize(p, qs)?;
    let eigenvalues = spectrum(&m)?;
    let (trivial, _, _) = recovery(&eigenvalues)?;
    let predicted = eigenvalues
        .iter()
        .enumerate()
        .filter(|(k, l)| *k != trivial && l.im >= 0.0)
        .map(|(_, l)| *l)
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .unwrap();
    let mode = eigenvector(&m, predicted)?;
    let a = Vec3::new(mode[0].re, mode[1].re, mode[2].re);
    let v = Vec3::new(mode[3].re, mode[4].re, mode[5].re);
    let scale = amplitude / a.norm();
    let (a, v) = (a * scale, v * scale);

    let steady = rotation_y(qs.axis_tilt);
    let c = rotation_from_vector(a) * steady;
    let initial = ShellState {
        orientation: c,
        omega: v + ansatz_omega(0.0, qs.revolve_rate, 0.0) - c * Vec3::Z * qs.drive_speed,
        center: Vec3::new(qs.radius, 0.0, p.radius),
        theta: qs.pendulum_phase,
        theta_dot: qs.drive_speed,
    };
    let drive = DriveProfile::constant(qs.pendulum_phase, qs.drive_speed);
    let mut sim = Simulator::new(*p, initial, *opts)?;
    let per_sample = (opts.output_stride / opts.dt).round().max(1.0) as u64;
    let mut times = Vec::new();
    let mut deviation = Vec::new();
    while sim.time() < duration {
        sim.advance(&drive, per_sample)?;
        let t = sim.time();
        let st = sim.state();
        let undo = rotation_z(qs.revolve_rate * t).transpose()
            * st.orientation
            * rotation_z(qs.drive_speed * t)
            * steady.transpose();
        let alpha = rotation_vector(&undo);
        times.push(t);
        deviation.push(alpha);
    }
    // project on the dominant horizontal direction of the initial deviation
    let dir = Vec3::new(a.x, a.y, 0.0);
    let dir = if dir.norm() > 0.0 {
        dir * (1.0 / dir.norm())
    } else {
        Vec3::X
    };
    let signal: Vec<f64> = deviation.iter().map(|d| d.dot(dir)).collect();
    let (decay_rate, frequency) = fit_damped_oscillation(&times, &signal)?;
    Ok(PerturbationResponse {
        decay_rate,
        frequency,
        predicted,
    })
}

/// Envelope decay rate from a log-linear fit of the |peaks|, and angular
/// frequency from the mean spacing of zero crossings.
pub fn fit_damped_oscillation(t: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let mut crossings = Vec::new();
    for k in 1..y.len() {
        if y[k - 1] == 0.0 || y[k - 1].signum() != y[k].signum() {
            let frac = y[k - 1] / (y[k - 1] - y[k]);
            crossings.push(t[k - 1] + frac * (t[k] - t[k - 1]));
        }
    }
    if crossings.len() < 4 {
        return Err(Error::DegenerateInput(format!(
            "only {} zero crossings; signal does not oscillate",
            crossings.len()
        )));
    }
    let half_period =
        (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    let frequency = PI / half_period;
    // largest |y| between consecutive crossings
    let mut peaks = Vec::new();
    for w in crossings.windows(2) {
        let best = t
            .iter()
            .zip(y)
            .filter(|(tk, _)| **tk > w[0] && **tk < w[1])
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
        if let Some((tk, yk)) = best {
            peaks.push((*tk, yk.abs().ln()));
        }
    }
    let n = peaks.len() as f64;
    let tm = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = peaks.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    Ok((sxy / sxx, frequency))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasistatic::{solve, sweep as qs_sweep, uniform_grid};

    fn state(w: f64) -> QuasiStaticState {
        solve(&RobotParams::default(), w, None, Branch::Normal).unwrap()
    }

    #[test]
    fn companion_structure() {
        let m = linearize(&RobotParams::default(), &state(PI)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[(i, j)], 0.0);
                assert_eq!(m[(i, j + 3)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn step_halving_changes_entries_little() {
        let p = RobotParams::default();
        let qs = state(1.5 * PI);
        let a = linearize_with_step(&p, &qs, 1e-5).unwrap();
        let b = linearize_with_step(&p, &qs, 5e-6).unwrap();
        let scale = (0..6)
            .flat_map(|i| (0..6).map(move |j| (i, j)))
            .map(|ij| a[ij].abs())
            .fold(0.0, f64::max);
        for i in 3..6 {
            for j in 0..6 {
                assert!(
                    (a[(i, j)] - b[(i, j)]).abs() < 1e-4 * scale,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn static_limit_has_vertical_symmetry_mode() {
        let p = RobotParams::default();
        let rep = analyze(&p, &QuasiStaticState::static_limit(&p)).unwrap();
        assert!(rep.eigenvalues[rep.trivial_mode_index].norm() < 1e-6);
        assert!(rep.trivial_alignment > 0.999);
        assert!(rep.stable);
        // frozen from an independent numpy linearisation
        assert!((rep.tau - 7.18).abs() < 0.01, "tau {}", rep.tau);
        let d = rep.dominant();
        assert!((d.re + 0.1393).abs() < 1e-3 && (d.im - 3.9146).abs() < 1e-3);
    }

    #[test]
    fn matches_independent_spectrum_at_pi() {
        let rep = analyze(&RobotParams::default(), &state(PI)).unwrap();
        let expected = [
            (0.0, 0.0),
            (-0.1318, 5.7645),
            (-0.1577, 2.7656),
            (-0.9646, 0.0),
        ];
        for (re, im) in expected {
            let target = Complex64::new(re, im);
            let best = rep
                .eigenvalues
                .iter()
                .map(|l| (l - target).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 2e-3, "missing eigenvalue near {target}");
        }
        assert!((rep.tau - 7.59).abs() < 0.02);
    }

    #[test]
    fn diagonal_and_known_polynomial() {
        let mut d = SquareMatrix::zeros(6);
        for k in 0..6 {
            d[(k, k)] = k as f64 - 2.5;
        }
        let ev = spectrum(&d).unwrap();
        for (k, l) in ev.iter().enumerate() {
            assert!((l.re - (2.5 - k as f64)).abs() < 1e-14 && l.im == 0.0);
        }
        // (λ²+1)(λ+1)(λ+2)(λ+3)(λ+4) = λ⁶ + 10λ⁵ + 36λ⁴ + 60λ³ + 59λ² + 50λ + 24
        let coeffs = [24.0, 50.0, 59.0, 60.0, 36.0, 10.0];
        let mut c = SquareMatrix::zeros(6);
        for k in 0..5 {
            c[(k, k + 1)] = 1.0;
        }
        for k in 0..6 {
            c[(5, k)] = -coeffs[k];
        }
        let ev = spectrum(&c).unwrap();
        let expected = [
            (0.0, 1.0),
            (0.0, -1.0),
            (-1.0, 0.0),
            (-2.0, 0.0),
            (-3.0, 0.0),
            (-4.0, 0.0),
        ];
        for (l, (re, im)) in ev.iter().zip(expected) {
            assert!((l - Complex64::new(re, im)).norm() < 1e-9, "{l}");
        }
    }

    #[test]
    fn recovery_rule() {
        let ev = [
            Complex64::new(0.0, 0.0),
            Complex64::new(-0.14, 0.9),
            Complex64::new(-0.14, -0.9),
            Complex64::new(-0.5, 0.0),
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, -2.0),
        ];
        let (k, tau, stable) = recovery(&ev).unwrap();
        assert_eq!(k, 0);
        assert!((tau - 1.0 / 0.14).abs() < 1e-12);
        assert!(stable);
        let mut unstable = ev;
        unstable[3] = Complex64::new(2e-6, 0.0);
        assert!(!recovery(&unstable).unwrap().2);
        let mut ambiguous = ev;
        ambiguous[3] = Complex64::new(5e-7, 0.0);
        assert!(matches!(
            recovery(&ambiguous),
            Err(Error::AmbiguousTrivialMode(..))
        ));
    }

    #[test]
    fn unconverged_state_is_rejected() {
        let mut qs = state(PI);
        qs.residual = 1e-3;
        assert!(linearize(&RobotParams::default(), &qs).is_err());
    }

    #[test]
    fn more_damping_does_not_reduce_margin() {
        let p = RobotParams::default();
        let stiffer = p.with_damping(1.5 * p.damping);
        for &w in &[0.0, PI, 2.0 * PI, 3.0 * PI] {
            let base = analyze(&p, &solve(&p, w, None, Branch::Normal).unwrap()).unwrap();
            let more =
                analyze(&stiffer, &solve(&stiffer, w, None, Branch::Normal).unwrap()).unwrap();
            assert!(more.dominant().re <= base.dominant().re + 1e-9, "at {w}");
        }
    }

    #[test]
    fn sweep_is_stable_with_seven_second_recovery() {
        let p = RobotParams::default();
        let table = qs_sweep(&p, &uniform_grid(3.0 * PI, 31)).unwrap();
        let reports = sweep(&p, table.states()).unwrap();
        assert!(reports.iter().all(|r| r.stable));
        let mid = reports
            .iter()
            .find(|r| (r.drive_speed - 1.5 * PI).abs() < 1e-9)
            .unwrap();
        assert!((mid.tau - 7.0).abs() < 2.1, "tau {}", mid.tau);
        let mut buf = Vec::new();
        write_eigenvalue_csv(&reports, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 6 * 31);
    }

    #[test]
    fn fit_recovers_synthetic_oscillation() {
        let t: Vec<f64> = (0..3000).map(|k| k as f64 * 0.01).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|t| (-0.15 * t).exp() * (2.7 * t + 0.4).cos())
            .collect();
        let (sigma, nu) = fit_damped_oscillation(&t, &y).unwrap();
        assert!((sigma + 0.15).abs() < 0.01);
        assert!((nu - 2.7).abs() < 0.01);
    }
}
