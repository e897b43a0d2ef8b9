//! Steady revolving motion at constant driving speed.
//!
//! At constant driving speed ω₀ the robot settles into a motion that is a
//! rigid rotation at rate Ω about a vertical axis: with the ground frame
//! centred on that axis and its x axis towards the contact point at t = 0,
//! the motor axis lies in the x–z plane at tilt ξ from vertical, the shell
//! spins at `−ω₀ ẑ′` on top of the revolution, and the pendulum sits at
//! phase θ₀. Everything then follows `u(t) = T_r(t)·u(0)`, so the angular
//! acceleration is `Ω ẑ × ω(0)` and the equation of motion at t = 0 leaves
//! three scalar conditions on (Ω, θ₀, ξ). The residual here substitutes that
//! state into [`EquationOfMotion`] rather than a hand-reduced formula.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    damping_torque, pendulum_kinematics, EquationOfMotion, RobotParams, ShellState,
};
use crate::error::{Error, Result};
use crate::interp::Hermite;
use crate::spatial::{rotation_y, wrap_angle, Vec3};

/// Convergence threshold on the normalised residual.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Continuation step along the driving speed (rad/s).
pub const CONTINUATION_STEP: f64 = 0.05 * PI;
pub const MAX_ITERATIONS: usize = 100;
/// Relative finite-difference step for the Newton Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Pendulum near the bottom of the shell.
    Normal,
    /// Pendulum near the top phase (θ₀ ≈ π); revolves the other way on a tighter circle.
    FastRevolving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiStaticState {
    /// Driving speed ω₀ (rad/s).
    pub drive_speed: f64,
    /// Revolving rate Ω about the vertical axis (rad/s).
    pub revolve_rate: f64,
    /// Pendulum phase θ₀ at t = 0, wrapped to (−π, π] (rad).
    pub pendulum_phase: f64,
    /// Motor-axis tilt ξ from vertical (rad).
    pub axis_tilt: f64,
    /// Revolving radius `ω₀ R sin ξ / Ω` (m); negative on the fast branch.
    pub radius: f64,
    pub branch: Branch,
    /// Normalised residual norm at the solution.
    pub residual: f64,
}

impl QuasiStaticState {
    /// Zero-speed limit: pendulum hanging below the centre, axis tilted by φ.
    pub fn static_limit(p: &RobotParams) -> Self {
        Self {
            drive_speed: 0.0,
            revolve_rate: 0.0,
            pendulum_phase: 0.0,
            axis_tilt: p.cone_angle,
            radius: p.static_radius(),
            branch: Branch::Normal,
            residual: 0.0,
        }
    }

    pub fn unknowns(&self) -> [f64; 3] {
        [self.revolve_rate, self.pendulum_phase, self.axis_tilt]
    }

    /// Speed of the shell centre along its circle, `Ω R₀ = ω₀ R sin ξ` (m/s).
    pub fn crossing_speed(&self, p: &RobotParams) -> f64 {
        self.drive_speed * p.radius * self.axis_tilt.sin()
    }

    /// Shell state at t = 0 in the frame centred on the revolving axis.
    pub fn initial_state(&self, p: &RobotParams) -> ShellState {
        ansatz_state(p, self.drive_speed, self.unknowns(), self.radius)
    }
}

/// Angular velocity `Ω ẑ − ω₀ ẑ′` with `ẑ′ = (sin ξ, 0, cos ξ)`.
pub fn ansatz_omega(drive_speed: f64, revolve_rate: f64, tilt: f64) -> Vec3 {
    Vec3::Z * revolve_rate - Vec3::new(tilt.sin(), 0.0, tilt.cos()) * drive_speed
}

fn ansatz_state(p: &RobotParams, drive_speed: f64, x: [f64; 3], radius: f64) -> ShellState {
    let [revolve_rate, phase, tilt] = x;
    ShellState {
        orientation: rotation_y(tilt),
        omega: ansatz_omega(drive_speed, revolve_rate, tilt),
        center: Vec3::new(radius, 0.0, p.radius),
        theta: phase,
        theta_dot: drive_speed,
    }
}

/// Torque scale used to normalise residuals: `m g r₀`.
pub fn torque_scale(p: &RobotParams) -> f64 {
    p.pendulum_mass * p.gravity * p.pendulum_distance
}

/// Equation-of-motion residual of the co-rotating ansatz at t = 0, divided
/// by [`torque_scale`]. `x = (Ω, θ₀, ξ)`.
pub fn residual(p: &RobotParams, drive_speed: f64, x: [f64; 3]) -> Result<Vec3> {
    let [revolve_rate, phase, _] = x;
    if revolve_rate == 0.0 {
        return Err(Error::InvalidState(
            "revolving rate is zero; use the static limit instead".into(),
        ));
    }
    if !x.iter().all(|v| v.is_finite()) || !drive_speed.is_finite() {
        return Err(Error::InvalidState(
            "non-finite quasi-static unknowns".into(),
        ));
    }
    let st = ansatz_state(p, drive_speed, x, 0.0);
    let mk = pendulum_kinematics(p, phase, drive_speed, 0.0);
    let eom = EquationOfMotion::assemble(p, &st, &[mk], Vec3::ZERO, damping_torque(p, st.omega));
    let omega_dot = (Vec3::Z * revolve_rate).cross(st.omega);
    Ok(eom.residual(omega_dot) * (1.0 / torque_scale(p)))
}

fn solve_3x3(j: [[f64; 3]; 3], b: Vec3) -> Option<Vec3> {
    crate::spatial::Mat3::from_rows(j)
        .inverse()
        .map(|inv| inv * b)
}

fn newton(p: &RobotParams, drive_speed: f64, start: [f64; 3]) -> Result<([f64; 3], f64)> {
    let mut x = start;
    let mut f = residual(p, drive_speed, x)?;
    let mut norm = f.norm();
    for iteration in 0..MAX_ITERATIONS {
        if norm < 1e-13 {
            return Ok((x, norm));
        }
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            let h = JACOBIAN_STEP * x[c].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let d = (residual(p, drive_speed, xp)? - residual(p, drive_speed, xm)?) * (0.5 / h);
            for r in 0..3 {
                jac[r][c] = d[r];
            }
        }
        let Some(delta) = solve_3x3(jac, f) else {
            return Err(Error::NoConvergence {
                iterations: iteration,
                residual: norm,
            });
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = [
                x[0] - scale * delta.x,
                x[1] - scale * delta.y,
                x[2] - scale * delta.z,
            ];
            if trial[0] != 0.0 {
                if let Ok(ft) = residual(p, drive_speed, trial) {
                    if ft.norm() < norm {
                        x = trial;
                        f = ft;
                        norm = ft.norm();
                        accepted = true;
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            // stalled at rounding level
            return if norm < RESIDUAL_TOLERANCE {
                Ok((x, norm))
            } else {
                Err(Error::NoConvergence {
                    iterations: iteration,
                    residual: norm,
                })
            };
        }
    }
    if norm < RESIDUAL_TOLERANCE {
        Ok((x, norm))
    } else {
        Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: norm,
        })
    }
}

fn classify(phase: f64) -> Branch {
    if wrap_angle(phase).abs() < FRAC_PI_2 {
        Branch::Normal
    } else {
        Branch::FastRevolving
    }
}

fn small_speed_guess(p: &RobotParams, drive_speed: f64) -> [f64; 3] {
    [drive_speed * p.cone_angle.cos(), 0.0, p.cone_angle]
}

/// Default starting point for the fast-revolving branch.
pub fn fast_branch_guess(drive_speed: f64) -> [f64; 3] {
    [-0.75 * drive_speed, PI, 2.4]
}

/// Newton solve of the steady state at `drive_speed`.
///
/// Without a guess, the normal branch is reached by continuation from the
/// static limit in steps of [`CONTINUATION_STEP`]; the fast branch starts
/// from [`fast_branch_guess`].
pub fn solve(
    p: &RobotParams,
    drive_speed: f64,
    guess: Option<[f64; 3]>,
    branch: Branch,
) -> Result<QuasiStaticState> {
    p.validate()?;
    if !(drive_speed >= 0.0) {
        return Err(Error::InvalidState(format!(
            "driving speed must be non-negative, got {drive_speed}"
        )));
    }
    if drive_speed == 0.0 {
        return match branch {
            Branch::Normal => Ok(QuasiStaticState::static_limit(p)),
            Branch::FastRevolving => Err(Error::InvalidState(
                "the fast-revolving branch has no zero-speed limit".into(),
            )),
        };
    }
    let start = match (guess, branch) {
        (Some(g), _) => g,
        (None, Branch::FastRevolving) => fast_branch_guess(drive_speed),
        (None, Branch::Normal) => {
            let mut x = small_speed_guess(p, drive_speed.min(CONTINUATION_STEP));
            let mut w = 0.0;
            while w + CONTINUATION_STEP < drive_speed {
                w += CONTINUATION_STEP;
                x = newton(p, w, x)?.0;
            }
            x
        }
    };
    finish(p, drive_speed, start, branch)
}

fn finish(
    p: &RobotParams,
    drive_speed: f64,
    start: [f64; 3],
    branch: Branch,
) -> Result<QuasiStaticState> {
    let (x, norm) = newton(p, drive_speed, start)?;
    let [revolve_rate, phase, tilt] = x;
    let phase = wrap_angle(phase);
    let found = classify(phase);
    if found != branch {
        return Err(Error::WrongBranch { theta0: phase });
    }
    Ok(QuasiStaticState {
        drive_speed,
        revolve_rate,
        pendulum_phase: phase,
        axis_tilt: tilt,
        radius: drive_speed * p.radius * tilt.sin() / revolve_rate,
        branch,
        residual: norm,
    })
}

/// Normal-branch states over an ascending grid that starts at zero, by
/// continuation (intermediate steps are inserted where the grid is coarse).
pub fn sweep(p: &RobotParams, grid: &[f64]) -> Result<QuasiStaticTable> {
    p.validate()?;
    if grid.first() != Some(&0.0) {
        return Err(Error::Config("sweep grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    let mut states = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    let mut last: Option<(f64, [f64; 3])> = None;
    for &w in grid {
        if w == 0.0 {
            states.push(QuasiStaticState::static_limit(p));
            continue;
        }
        let mut guess = match last {
            Some((_, x)) => x,
            None => small_speed_guess(p, w.min(CONTINUATION_STEP)),
        };
        let from = last.map_or(0.0, |(lw, _)| lw);
        let substeps = ((w - from) / CONTINUATION_STEP).ceil() as usize;
        let mut ok = true;
        for k in 1..substeps {
            let wk = from + (w - from) * k as f64 / substeps as f64;
            match newton(p, wk, guess) {
                Ok((x, _)) => guess = x,
                Err(e) => {
                    failures.push((w, e));
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        match finish(p, w, guess, Branch::Normal) {
            Ok(qs) => {
                last = Some((w, qs.unknowns()));
                states.push(qs);
            }
            Err(e) => failures.push((w, e)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::SweepFailures(failures));
    }
    QuasiStaticTable::new(*p, states)
}

/// Uniform grid `[0, max]` with `points` nodes.
pub fn uniform_grid(max: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect()
}

/// Steady states tabulated against driving speed, with interpolation.
#[derive(Debug, Clone)]
pub struct QuasiStaticTable {
    params: RobotParams,
    states: Vec<QuasiStaticState>,
    radius: Hermite,
    speed: Hermite,
    revolve_rate: Hermite,
    tilt: Hermite,
    phase: Hermite,
}

pub const QUASISTATIC_CSV_HEADER: [&str; 5] = ["omega0", "Omega", "theta0", "xi", "R0"];

impl QuasiStaticTable {
    pub fn new(params: RobotParams, states: Vec<QuasiStaticState>) -> Result<Self> {
        let xs: Vec<f64> = states.iter().map(|s| s.drive_speed).collect();
        let column = |f: fn(&QuasiStaticState) -> f64| states.iter().map(f).collect::<Vec<f64>>();
        let radius = Hermite::new(xs.clone(), column(|s| s.radius), true)?;
        let speeds: Vec<f64> = states.iter().map(|s| s.crossing_speed(&params)).collect();
        let speed = Hermite::new(xs.clone(), speeds, true)?;
        let revolve_rate = Hermite::new(xs.clone(), column(|s| s.revolve_rate), false)?;
        let tilt = Hermite::new(xs.clone(), column(|s| s.axis_tilt), false)?;
        let phase = Hermite::new(xs, column(|s| s.pendulum_phase), false)?;
        Ok(Self {
            params,
            states,
            radius,
            speed,
            revolve_rate,
            tilt,
            phase,
        })
    }

    pub fn states(&self) -> &[QuasiStaticState] {
        &self.states
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn speed_range(&self) -> (f64, f64) {
        self.radius.domain()
    }

    pub fn radius_at(&self, drive_speed: f64) -> Result<f64> {
        self.radius.value(drive_speed)
    }

    /// `dR₀/dω₀` of the monotone interpolant (m·s/rad).
    pub fn radius_slope(&self, drive_speed: f64) -> Result<f64> {
        self.radius.derivative(drive_speed)
    }

    /// Interpolated state (residual field is the worse of the two neighbours).
    pub fn state_at(&self, drive_speed: f64) -> Result<QuasiStaticState> {
        let radius = self.radius.value(drive_speed)?;
        let k = self
            .states
            .partition_point(|s| s.drive_speed <= drive_speed)
            .max(1)
            - 1;
        let k1 = (k + 1).min(self.states.len() - 1);
        Ok(QuasiStaticState {
            drive_speed,
            revolve_rate: self.revolve_rate.value(drive_speed)?,
            pendulum_phase: self.phase.value(drive_speed)?,
            axis_tilt: self.tilt.value(drive_speed)?,
            radius,
            branch: Branch::Normal,
            residual: self.states[k].residual.max(self.states[k1].residual),
        })
    }

    /// Driving speed whose steady radius is `radius`.
    pub fn drive_speed_for_radius(&self, radius: f64) -> Result<f64> {
        self.radius.invert_increasing(radius)
    }

    pub fn crossing_speed_at(&self, drive_speed: f64) -> Result<f64> {
        self.speed.value(drive_speed)
    }

    /// Driving speed whose steady crossing speed `Ω R₀` equals `speed`.
    pub fn drive_speed_for_crossing_speed(&self, speed: f64) -> Result<f64> {
        let (lo, hi) = self.speed_range();
        let (min, max) = (self.speed.value(lo)?, self.speed.value(hi)?);
        self.speed
            .invert_increasing(speed)
            .map_err(|_| Error::InfeasibleSpeed { speed, min, max })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(QUASISTATIC_CSV_HEADER)?;
        for s in &self.states {
            w.write_record([
                s.drive_speed.to_string(),
                s.revolve_rate.to_string(),
                s.pendulum_phase.to_string(),
                s.axis_tilt.to_string(),
                s.radius.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::pendulum_kinematics;
    use std::sync::OnceLock;

    fn table() -> &'static QuasiStaticTable {
        static TABLE: OnceLock<QuasiStaticTable> = OnceLock::new();
        TABLE.get_or_init(|| sweep(&RobotParams::default(), &uniform_grid(3.0 * PI, 50)).unwrap())
    }

    /// Hand-reduced steady-state balance, written term by term:
    /// `m u × (−g ẑ + Ω²(R₀ x̂ + u − (u·ẑ)ẑ)) + M Ω² R₀ R ŷ − k₀ ω + I Ω ω₀ sin ξ ŷ`.
    /// It equals minus the equation-of-motion residual.
    fn reduced_balance(p: &RobotParams, w0: f64, x: [f64; 3]) -> Vec3 {
        let [om, phase, tilt] = x;
        let r0 = w0 * p.radius * tilt.sin() / om;
        let mk = pendulum_kinematics(p, phase, w0, 0.0);
        let u = Vec3::Z * p.radius + rotation_y(tilt) * mk.r_body;
        let horizontal = Vec3::X * r0 + u - Vec3::Z * u.z;
        let omega = ansatz_omega(w0, om, tilt);
        u.cross(Vec3::Z * -p.gravity + horizontal * (om * om)) * p.pendulum_mass
            + Vec3::Y * (p.carried_mass() * om * om * r0 * p.radius)
            - omega * p.damping
            + Vec3::Y * (p.shell_inertia * om * w0 * tilt.sin())
    }

    #[test]
    fn static_limit_radius() {
        let p = RobotParams::default();
        let qs = solve(&p, 0.0, None, Branch::Normal).unwrap();
        assert!((qs.radius - 0.12).abs() < 1e-6);
        assert_eq!(qs.axis_tilt, p.cone_angle);
    }

    #[test]
    fn converged_state_has_small_residual_and_consistent_radius() {
        let p = RobotParams::default();
        for &w in &[0.3, PI, 2.5 * PI] {
            let qs = solve(&p, w, None, Branch::Normal).unwrap();
            assert!(residual(&p, w, qs.unknowns()).unwrap().norm() < RESIDUAL_TOLERANCE);
            assert!(
                (qs.radius - w * p.radius * qs.axis_tilt.sin() / qs.revolve_rate).abs() < 1e-15
            );
            assert!(qs.axis_tilt > 0.0 && qs.axis_tilt < FRAC_PI_2);
            assert!(qs.pendulum_phase.abs() < FRAC_PI_2);
        }
    }

    #[test]
    fn residual_agrees_with_hand_reduced_balance() {
        let p = RobotParams::default();
        for &(w, x) in &[
            (PI, [1.3, 0.1, 0.9]),
            (2.0, [0.7, -0.4, 1.2]),
            (5.0, [-2.0, 2.9, 0.4]),
        ] {
            let ours = residual(&p, w, x).unwrap() * torque_scale(&p);
            let reduced = reduced_balance(&p, w, x);
            assert!((ours + reduced).norm() < 1e-12 * reduced.norm().max(1.0));
        }
    }

    #[test]
    fn residual_is_sensitive_to_tilt() {
        let p = RobotParams::default();
        let qs = solve(&p, PI, None, Branch::Normal).unwrap();
        let mut x = qs.unknowns();
        x[2] += 0.01;
        assert!(residual(&p, PI, x).unwrap().norm() > 1e-4);
    }

    #[test]
    fn residual_is_periodic_in_phase() {
        let p = RobotParams::default();
        let x = [1.2, 0.3, 0.8];
        let a = residual(&p, 2.0, x).unwrap();
        let b = residual(&p, 2.0, [x[0], x[1] + 2.0 * PI, x[2]]).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn zero_revolve_rate_is_invalid() {
        let p = RobotParams::default();
        assert!(matches!(
            residual(&p, 1.0, [0.0, 0.0, 0.5]),
            Err(Error::InvalidState(_))
        ));
        assert!(solve(&p, -1.0, None, Branch::Normal).is_err());
    }

    #[test]
    fn matches_independent_solver() {
        // values from an independent scipy solution of the same balance
        let p = RobotParams::default();
        let cases = [
            (PI, 1.42745, 0.06968, 1.05239, 0.2294),
            (3.0 * PI, 0.87108, 0.23909, 1.38072, 1.27497),
        ];
        for (w, om, phase, tilt, r0) in cases {
            let qs = solve(&p, w, None, Branch::Normal).unwrap();
            assert!((qs.revolve_rate - om).abs() < 1e-4);
            assert!((qs.pendulum_phase - phase).abs() < 1e-4);
            assert!((qs.axis_tilt - tilt).abs() < 1e-4);
            assert!((qs.radius - r0).abs() < 1e-4);
        }
    }

    #[test]
    fn top_speed_state() {
        let p = RobotParams::default();
        let qs = solve(&p, 3.0 * PI, None, Branch::Normal).unwrap();
        assert!((qs.radius - 1.28).abs() < 0.128, "R0(3pi) = {}", qs.radius);
        assert!(qs.axis_tilt > 1.3 && qs.axis_tilt < FRAC_PI_2);
        assert!(qs.pendulum_phase.abs() < 0.3);
    }

    #[test]
    fn fast_branch_revolves_backwards_on_a_tighter_circle() {
        let p = RobotParams::default();
        let fast = solve(&p, 2.0, None, Branch::FastRevolving).unwrap();
        assert_eq!(fast.branch, Branch::FastRevolving);
        assert!(fast.revolve_rate < 0.0);
        assert!(fast.radius.abs() < p.static_radius());
        // asking for the normal branch from a fast guess is refused
        let err = solve(&p, 2.0, Some(fast_branch_guess(2.0)), Branch::Normal).unwrap_err();
        assert!(matches!(err, Error::WrongBranch { .. }));
    }

    #[test]
    fn sweep_trends() {
        let t = table();
        let s = t.states();
        assert_eq!(s.len(), 50);
        assert!(s.windows(2).all(|w| w[1].radius > w[0].radius));
        assert!(s.windows(2).all(|w| w[1].axis_tilt > w[0].axis_tilt));
        assert!(s
            .iter()
            .all(|q| q.axis_tilt < FRAC_PI_2 && q.pendulum_phase.abs() < FRAC_PI_2));
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let p = RobotParams::default();
        assert!(sweep(&p, &[0.5, 1.0]).is_err());
        assert!(sweep(&p, &[0.0, 1.0, 0.5]).is_err());
    }

    #[test]
    fn damping_has_little_effect_on_radius() {
        let p = RobotParams::default();
        let grid = uniform_grid(3.0 * PI, 25);
        let base = sweep(&p, &grid).unwrap();
        for factor in [0.5, 2.0] {
            let other = sweep(&p.with_damping(p.damping * factor), &grid).unwrap();
            for (a, b) in base.states().iter().zip(other.states()) {
                assert!(((b.radius - a.radius) / a.radius).abs() < 0.05);
            }
        }
    }

    #[test]
    fn slope_at_node_is_centred_difference() {
        let t = table();
        let s = t.states();
        for k in [5, 20, 40] {
            let fd =
                (s[k + 1].radius - s[k - 1].radius) / (s[k + 1].drive_speed - s[k - 1].drive_speed);
            let slope = t.radius_slope(s[k].drive_speed).unwrap();
            assert!((slope - fd).abs() < 1e-12 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn slope_positive_and_grid_converged() {
        let t = table();
        for k in 0..=300 {
            let w = 3.0 * PI * k as f64 / 300.0;
            assert!(
                t.radius_slope(w).unwrap() > 0.0,
                "slope not positive at {w}"
            );
        }
        let fine = sweep(&RobotParams::default(), &uniform_grid(3.0 * PI, 99)).unwrap();
        for &w in &[1.0, 2.0, PI, 5.0, 7.0, 9.0] {
            let a = t.radius_slope(w).unwrap();
            let b = fine.radius_slope(w).unwrap();
            assert!(((a - b) / b).abs() < 0.01, "slope at {w}: {a} vs {b}");
        }
        assert!(matches!(
            t.radius_slope(10.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn crossing_speed_inversion() {
        let t = table();
        let qs = solve(&RobotParams::default(), PI, None, Branch::Normal).unwrap();
        let v = qs.revolve_rate * qs.radius;
        let w = t.drive_speed_for_crossing_speed(v).unwrap();
        assert!((w - PI).abs() < 1e-3, "recovered {w}");
        assert!(matches!(
            t.drive_speed_for_crossing_speed(10.0),
            Err(Error::InfeasibleSpeed { .. })
        ));
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        table().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("omega0,Omega,theta0,xi,R0\n"));
        assert_eq!(text.lines().count(), 51);
    }
}
