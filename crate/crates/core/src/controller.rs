//! Curvature-center control.
//!
//! At constant driving speed the robot circles a fixed point `o`. Changing
//! the speed changes the radius, and while the radius changes `o` slides
//! along `s − o`. The controller estimates `o` from the pose, projects the
//! error `o_g − o` on the current `s − o` direction and commands the radius
//! rate through a PID, converted to a driving-speed rate with the slope of
//! the steady radius curve.

use std::f64::consts::TAU;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasistatic::{QuasiStaticState, QuasiStaticTable};
use crate::spatial::{wrap_angle, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Shell centre (m).
    pub s: Vec3,
    /// Heading of `s − o` in the ground frame, in (−π, π].
    pub gamma: f64,
    /// Timestamp (s).
    pub t: f64,
}

impl Pose {
    pub fn new(s: Vec3, gamma: f64, t: f64) -> Self {
        Self {
            s,
            gamma: wrap_angle(gamma),
            t,
        }
    }

    pub fn direction(&self) -> Vec3 {
        Vec3::new(self.gamma.cos(), self.gamma.sin(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Proportional gain on the projected centre error (1/s).
    pub kp: f64,
    /// Integral gain (1/s²).
    pub ki: f64,
    /// Derivative gain (dimensionless).
    pub kd: f64,
    /// Gain pulling the steady radius towards the task radius (1/s).
    pub kr: f64,
    /// Leak rate of the integral (1/s); makes the circling equilibrium unique.
    pub integral_leak: f64,
    /// Radius band the commanded speed is held in (m).
    pub r_min: f64,
    pub r_max: f64,
    /// Largest commanded driving-speed rate (rad/s²).
    pub beta_max: f64,
    /// Control-loop rate (Hz).
    pub rate_hz: f64,
    /// Longest accepted gap between consecutive poses (s).
    pub max_pose_gap: f64,
    /// Time-to-go at which the motor is stopped (s).
    pub dt_stop: f64,
    /// Radius of the circle used to approach a stop (m).
    pub stop_radius: f64,
    /// Motor deceleration used by the stop manoeuvre (rad/s²).
    pub stop_decel: f64,
    /// Centre error under which the robot counts as circling its target (m).
    pub capture_tolerance: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kp: 0.5,
            ki: 0.05,
            kd: 0.1,
            kr: 0.1,
            integral_leak: 0.1,
            r_min: 0.15,
            r_max: 1.28,
            beta_max: 0.5,
            rate_hz: 20.0,
            max_pose_gap: 0.5,
            dt_stop: 0.15,
            stop_radius: 0.20,
            stop_decel: 50.0,
            capture_tolerance: 0.03,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kp", self.kp),
            ("r_min", self.r_min),
            ("beta_max", self.beta_max),
            ("rate_hz", self.rate_hz),
            ("max_pose_gap", self.max_pose_gap),
            ("stop_radius", self.stop_radius),
            ("stop_decel", self.stop_decel),
            ("capture_tolerance", self.capture_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "controller {name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("ki", self.ki),
            ("kd", self.kd),
            ("kr", self.kr),
            ("integral_leak", self.integral_leak),
            ("dt_stop", self.dt_stop),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "controller {name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.r_max > self.r_min) {
            return Err(Error::Config(format!(
                "radius band [{}, {}] is empty",
                self.r_min, self.r_max
            )));
        }
        if !(self.stop_radius >= self.r_min && self.stop_radius <= self.r_max) {
            return Err(Error::Config(format!(
                "stop radius {} outside [{}, {}]",
                self.stop_radius, self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate_hz
    }
}

/// `o = s − R₀ (cos γ, sin γ, 0)`.
pub fn estimate_center(pose: &Pose, r0: f64) -> Vec3 {
    pose.s - pose.direction() * r0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directive {
    /// Circle the target centre indefinitely.
    Orbit,
    /// Pass through the target point at the given velocity.
    Cross(Vec3),
    /// Stop at the target point.
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointTask {
    /// Point to reach (m); for an orbit, a point of the target circle.
    pub target: Vec3,
    pub directive: Directive,
    /// Target revolving centre `o_g` (m).
    pub center: Vec3,
    /// Target revolving radius `R_g` (m).
    pub radius: f64,
}

impl WaypointTask {
    pub fn orbit(center: Vec3, radius: f64) -> Self {
        Self {
            target: center + Vec3::X * radius,
            directive: Directive::Orbit,
            center,
            radius,
        }
    }
}

/// Counter-clockwise angle (in [0, 2π)) swept about the target centre from
/// the pose to the target point, divided by the revolving rate.
pub fn time_to_go(pose: &Pose, task: &WaypointTask, revolve_rate: f64) -> f64 {
    let from = pose.s - task.center;
    let to = task.target - task.center;
    let mut angle = to.y.atan2(to.x) - from.y.atan2(from.x);
    angle = angle.rem_euclid(TAU);
    if angle > TAU - 1e-12 {
        angle = 0.0;
    }
    angle / revolve_rate
}

/// True once the predicted arc time to the target point is at most `dt_stop`.
pub fn stop_trigger(pose: &Pose, task: &WaypointTask, qs: &QuasiStaticState, dt_stop: f64) -> bool {
    qs.revolve_rate > 0.0 && time_to_go(pose, task, qs.revolve_rate) <= dt_stop
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    /// Estimated revolving centre (m).
    pub center: Vec3,
    /// Commanded driving speed (rad/s).
    pub omega0_cmd: f64,
    pub integral: f64,
    pub last_error: Option<f64>,
    pub last_time: Option<f64>,
    /// Whether the last step hit a rate or radius limit.
    pub saturated: bool,
}

impl ControllerState {
    pub fn at_rest() -> Self {
        Self {
            center: Vec3::ZERO,
            omega0_cmd: 0.0,
            integral: 0.0,
            last_error: None,
            last_time: None,
            saturated: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    table: Arc<QuasiStaticTable>,
    speed_min: f64,
    speed_max: f64,
}

impl Controller {
    pub fn new(config: ControllerConfig, table: Arc<QuasiStaticTable>) -> Result<Self> {
        config.validate()?;
        let (_, top) = table.speed_range();
        let speed_min = table.drive_speed_for_radius(config.r_min)?;
        // a band reaching past the tabulated range is capped at its end
        let speed_max = if config.r_max >= table.radius_at(top)? {
            top
        } else {
            table.drive_speed_for_radius(config.r_max)?
        };
        Ok(Self {
            config,
            table,
            speed_min,
            speed_max,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn table(&self) -> &QuasiStaticTable {
        &self.table
    }

    /// Driving speeds whose steady radius is `r_min` and `r_max`.
    pub fn speed_band(&self) -> (f64, f64) {
        (self.speed_min, self.speed_max)
    }

    pub fn estimate_center(&self, pose: &Pose, drive_speed: f64) -> Result<Vec3> {
        Ok(estimate_center(pose, self.table.radius_at(drive_speed)?))
    }

    /// One control update. Below the radius band the command spins up at
    /// `beta_max` without feedback; inside it the PID acts on the projected
    /// centre error, plus a slow pull of the steady radius towards the task
    /// radius; the integral is frozen whenever a limit binds.
    pub fn control_step(
        &self,
        cs: &ControllerState,
        pose: &Pose,
        task: &WaypointTask,
        dt: f64,
    ) -> Result<(ControllerState, f64)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidState(format!(
                "control period must be positive, got {dt}"
            )));
        }
        if let Some(last) = cs.last_time {
            let gap = pose.t - last;
            if !(gap <= self.config.max_pose_gap) {
                return Err(Error::StalePose {
                    gap,
                    limit: self.config.max_pose_gap,
                });
            }
        }
        let cfg = &self.config;
        let center = self.estimate_center(pose, cs.omega0_cmd)?;
        let error = (task.center - center).dot(pose.direction());
        let mut next = ControllerState {
            center,
            omega0_cmd: cs.omega0_cmd,
            integral: cs.integral,
            last_error: Some(error),
            last_time: Some(pose.t),
            saturated: false,
        };
        let step = cfg.beta_max * dt;
        if cs.omega0_cmd < self.speed_min {
            next.omega0_cmd = (cs.omega0_cmd + step).min(self.speed_min);
            next.saturated = true;
            return Ok((next, next.omega0_cmd));
        }
        let derivative = cs.last_error.map_or(0.0, |e| (error - e) / dt);
        let integral = cs.integral + (error - cfg.integral_leak * cs.integral) * dt;
        let u = cfg.kp * error + cfg.ki * integral + cfg.kd * derivative;
        // a uniform radius ramp moves o perpendicular to (cos γ, sin γ),
        // so this term does not feed the projected error
        let radius = self.table.radius_at(cs.omega0_cmd)?;
        let radius_rate = -u + cfg.kr * (task.radius - radius);
        let slope = self.table.radius_slope(cs.omega0_cmd)?;
        let beta = radius_rate / slope;
        let clamped_beta = beta.clamp(-cfg.beta_max, cfg.beta_max);
        let raw = cs.omega0_cmd + clamped_beta * dt;
        let cmd = raw.clamp(self.speed_min, self.speed_max);
        next.saturated = clamped_beta != beta || cmd != raw;
        if !next.saturated {
            next.integral = integral;
        }
        next.omega0_cmd = cmd;
        Ok((next, cmd))
    }

    /// Task for a target point. A crossing velocity fixes the radius
    /// through the steady crossing speed; a stop uses the configured stop
    /// radius with `approach` as the arrival direction. The centre sits on
    /// the left of the arrival direction, matching counter-clockwise revolution.
    pub fn plan_waypoint(
        &self,
        target: Vec3,
        directive: Directive,
        approach: Vec3,
    ) -> Result<WaypointTask> {
        let (radius, direction) = match directive {
            Directive::Cross(v) => {
                let speed = v.horizontal().norm();
                let (lo, hi) = (
                    self.table.crossing_speed_at(self.speed_min)?,
                    self.table.crossing_speed_at(self.speed_max)?,
                );
                if !(speed >= lo && speed <= hi) {
                    return Err(Error::InfeasibleSpeed {
                        speed,
                        min: lo,
                        max: hi,
                    });
                }
                let w = self.table.drive_speed_for_crossing_speed(speed)?;
                (self.table.radius_at(w)?, v.horizontal())
            }
            Directive::Stop | Directive::Orbit => (self.config.stop_radius, approach.horizontal()),
        };
        let norm = direction.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateInput("waypoint direction is zero".into()));
        }
        let d = direction * (1.0 / norm);
        Ok(WaypointTask {
            target: target.horizontal() + Vec3::Z * target.z,
            directive,
            center: target + Vec3::Z.cross(d) * radius,
            radius,
        })
    }

    /// Steady state at the current command, for the stop trigger.
    pub fn steady_state(&self, drive_speed: f64) -> Result<QuasiStaticState> {
        self.table.state_at(drive_speed)
    }

    /// Whether the robot is circling the task centre closely enough for the
    /// stop trigger to be trusted.
    pub fn captured(&self, cs: &ControllerState, task: &WaypointTask) -> bool {
        cs.omega0_cmd >= self.speed_min
            && cs.center.planar_distance(task.center) <= self.config.capture_tolerance
    }
}

/// Single-slot mailbox between a pose producer and the controller; a newer
/// pose overwrites one not yet taken.
#[derive(Debug, Default)]
pub struct PoseMailbox {
    slot: Mutex<Option<Pose>>,
}

impl PoseMailbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores a pose; returns true when an unread one was dropped.
    pub fn post(&self, pose: Pose) -> bool {
        let mut slot = self.slot.lock().unwrap_or_else(|e| e.into_inner());
        slot.replace(pose).is_some()
    }

    pub fn take(&self) -> Option<Pose> {
        self.slot.lock().unwrap_or_else(|e| e.into_inner()).take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RobotParams;
    use crate::quasistatic::{solve, sweep, uniform_grid, Branch};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};
    use std::sync::OnceLock;

    fn table() -> Arc<QuasiStaticTable> {
        static TABLE: OnceLock<Arc<QuasiStaticTable>> = OnceLock::new();
        TABLE
            .get_or_init(|| {
                Arc::new(sweep(&RobotParams::default(), &uniform_grid(3.0 * PI, 50)).unwrap())
            })
            .clone()
    }

    fn controller(config: ControllerConfig) -> Controller {
        Controller::new(config, table()).unwrap()
    }

    fn running(w: f64) -> ControllerState {
        ControllerState {
            omega0_cmd: w,
            last_time: Some(0.0),
            ..ControllerState::at_rest()
        }
    }

    #[test]
    fn center_estimate_geometry() {
        let o = estimate_center(&Pose::new(Vec3::new(1.0, 0.0, 0.12), 0.0, 0.0), 0.35);
        assert!((o - Vec3::new(0.65, 0.0, 0.12)).norm() < 1e-15);
        let o = estimate_center(&Pose::new(Vec3::new(0.0, 0.0, 0.12), FRAC_PI_2, 0.0), 0.35);
        assert!((o - Vec3::new(0.0, -0.35, 0.12)).norm() < 1e-15);
    }

    #[test]
    fn null_error_keeps_command() {
        let c = controller(ControllerConfig::default());
        let w = 2.0;
        let r0 = table().radius_at(w).unwrap();
        let pose = Pose::new(Vec3::new(r0, 0.0, 0.12), 0.0, 0.05);
        let task = WaypointTask::orbit(Vec3::new(0.0, 0.0, 0.12), r0);
        let (next, cmd) = c.control_step(&running(w), &pose, &task, 0.05).unwrap();
        assert_eq!(cmd, w);
        assert_eq!(next.last_error, Some(0.0));
    }

    #[test]
    fn positive_error_shrinks_radius() {
        let cfg = ControllerConfig {
            ki: 0.0,
            kd: 0.0,
            kr: 0.0,
            ..Default::default()
        };
        let c = controller(cfg);
        let pose = Pose::new(Vec3::new(0.5, 0.0, 0.12), 0.0, 0.05);
        // target centre further along +x than the estimate
        let task = WaypointTask::orbit(Vec3::new(0.4, 0.0, 0.12), 0.3);
        let (_, cmd) = c.control_step(&running(4.0), &pose, &task, 0.05).unwrap();
        assert!(cmd < 4.0);
    }

    #[test]
    fn stale_pose_is_an_error() {
        let c = controller(ControllerConfig::default());
        let pose = Pose::new(Vec3::new(0.5, 0.0, 0.12), 0.0, 2.0);
        let task = WaypointTask::orbit(Vec3::ZERO, 0.3);
        let err = c
            .control_step(&running(2.0), &pose, &task, 0.05)
            .unwrap_err();
        assert!(matches!(err, Error::StalePose { .. }));
        assert!(c.control_step(&running(2.0), &pose, &task, 0.0).is_err());
    }

    #[test]
    fn spin_up_from_rest() {
        let c = controller(ControllerConfig::default());
        let task = WaypointTask::orbit(Vec3::new(1.0, 1.0, 0.12), 0.35);
        let mut cs = ControllerState::at_rest();
        let mut t = 0.0;
        while cs.omega0_cmd < c.speed_band().0 {
            t += 0.05;
            let pose = Pose::new(Vec3::new(0.0, 0.0, 0.12), 0.3, t);
            let before = cs.omega0_cmd;
            cs = c.control_step(&cs, &pose, &task, 0.05).unwrap().0;
            assert!(cs.omega0_cmd - before <= 0.5 * 0.05 + 1e-15);
            assert!(t < 100.0);
        }
    }

    #[test]
    fn plan_waypoint_geometry_and_inversion() {
        let c = controller(ControllerConfig::default());
        let qs = solve(&RobotParams::default(), PI, None, Branch::Normal).unwrap();
        let v = qs.revolve_rate * qs.radius;
        let task = c
            .plan_waypoint(Vec3::ZERO, Directive::Cross(Vec3::X * v), Vec3::X)
            .unwrap();
        assert!(
            (task.radius - qs.radius).abs() < 1e-3,
            "radius {}",
            task.radius
        );
        assert!(task.center.x.abs() < 1e-12 && (task.center.y - task.radius).abs() < 1e-12);
        let stop = c
            .plan_waypoint(Vec3::new(1.0, 1.0, 0.0), Directive::Stop, Vec3::Y)
            .unwrap();
        assert_eq!(stop.radius, c.config().stop_radius);
        assert!((stop.center - Vec3::new(1.0 - stop.radius, 1.0, 0.0)).norm() < 1e-12);
        let err = c
            .plan_waypoint(Vec3::ZERO, Directive::Cross(Vec3::X * 5.0), Vec3::X)
            .unwrap_err();
        assert!(matches!(err, Error::InfeasibleSpeed { .. }));
    }

    #[test]
    fn trigger_timing() {
        let qs = QuasiStaticState {
            revolve_rate: 1.0,
            ..QuasiStaticState::static_limit(&RobotParams::default())
        };
        let task = WaypointTask::orbit(Vec3::ZERO, 1.0);
        let at = Pose::new(task.target, FRAC_PI_2, 0.0);
        assert!(stop_trigger(&at, &task, &qs, 0.15));
        let opposite = Pose::new(Vec3::new(-1.0, 0.0, 0.0), 0.0, 0.0);
        assert!(!stop_trigger(&opposite, &task, &qs, 0.15));
        // just short of the target in the direction of travel
        let near = Pose::new(Vec3::new(0.1f64.cos(), -0.1f64.sin(), 0.0), 0.0, 0.0);
        assert!(stop_trigger(&near, &task, &qs, 0.15));
        let past = Pose::new(Vec3::new(0.1f64.cos(), 0.1f64.sin(), 0.0), 0.0, 0.0);
        assert!(!stop_trigger(&past, &task, &qs, 0.15));
    }

    #[test]
    fn mailbox_keeps_latest() {
        let mb = Arc::new(PoseMailbox::new());
        let producer = {
            let mb = Arc::clone(&mb);
            std::thread::spawn(move || {
                for k in 0..100 {
                    mb.post(Pose::new(Vec3::ZERO, 0.0, k as f64));
                }
            })
        };
        producer.join().unwrap();
        assert_eq!(mb.take().unwrap().t, 99.0);
        assert!(mb.take().is_none());
    }

    #[test]
    fn config_validation() {
        assert!(ControllerConfig::default().validate().is_ok());
        assert!(ControllerConfig {
            r_max: 0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ControllerConfig {
            kp: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn command_rate_and_radius_band(
            w in 1.0f64..9.0,
            x in -2.0f64..2.0,
            y in -2.0f64..2.0,
            gamma in -3.1f64..3.1,
            integral in -5.0f64..5.0,
        ) {
            let c = controller(ControllerConfig::default());
            let (lo, hi) = c.speed_band();
            let w = w.clamp(lo, hi);
            let cs = ControllerState { integral, ..running(w) };
            let pose = Pose::new(Vec3::new(x, y, 0.12), gamma, 0.05);
            let task = WaypointTask::orbit(Vec3::new(0.3, -0.2, 0.12), 0.35);
            let (_, cmd) = c.control_step(&cs, &pose, &task, 0.05).unwrap();
            prop_assert!((cmd - w).abs() <= 0.5 * 0.05 + 1e-12);
            let r = table().radius_at(cmd).unwrap();
            prop_assert!((0.15 - 1e-9..=1.28 + 1e-9).contains(&r));
        }

        #[test]
        fn direction_law_with_proportional_only(
            w in 2.0f64..8.0,
            x in -1.0f64..1.0,
            y in -1.0f64..1.0,
            gamma in -3.1f64..3.1,
        ) {
            let c = controller(ControllerConfig { ki: 0.0, kd: 0.0, kr: 0.0, ..Default::default() });
            let pose = Pose::new(Vec3::new(x, y, 0.12), gamma, 0.05);
            let task = WaypointTask::orbit(Vec3::new(0.2, 0.1, 0.12), 0.35);
            let cs = running(w);
            let o = c.estimate_center(&pose, w).unwrap();
            let e = (task.center - o).dot(pose.direction());
            let (_, cmd) = c.control_step(&cs, &pose, &task, 0.05).unwrap();
            let dr = table().radius_at(cmd).unwrap() - table().radius_at(w).unwrap();
            if e.abs() > 1e-9 && cmd > c.speed_band().0 && cmd < c.speed_band().1 {
                prop_assert!(dr * e < 0.0);
            }
        }
    }
}
