//! The controller in the loop with the simulated robot.
//!
//! Poses are sampled from the simulation at the control rate (optionally
//! with Gaussian noise), the command is fed to the motor as a linear ramp
//! that reaches it at the next control tick, and the plant is advanced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerState, Directive, Pose, WaypointTask};
use crate::drive::{DriveProfile, DriveSegment};
use crate::dynamics::{RobotParams, ShellState};
use crate::error::{Error, Result};
use crate::integrator::{SimOptions, Simulator, Trajectory, TrajectorySample};
use crate::spatial::Vec3;

/// Optional plant disturbances; all zero by default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Disturbance {
    /// Constant horizontal force on the shell centre, as from a ground slope (N).
    pub slope_force: Vec3,
    /// Standard deviation of the position noise on each pose axis (m).
    pub position_noise: f64,
    /// Standard deviation of the heading noise (rad).
    pub heading_noise: f64,
}

impl Disturbance {
    pub fn validate(&self) -> Result<()> {
        if !(self.position_noise >= 0.0 && self.heading_noise >= 0.0)
            || !self.slope_force.is_finite()
        {
            return Err(Error::Config(
                "disturbance magnitudes must be finite and non-negative".into(),
            ));
        }
        if self.slope_force.z != 0.0 {
            return Err(Error::Config("slope force must be horizontal".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLogRow {
    pub t: f64,
    pub s: Vec3,
    pub o: Vec3,
    pub o_g: Vec3,
    pub omega0_cmd: f64,
    pub error: f64,
}

pub const CONTROL_LOG_CSV_HEADER: [&str; 9] = [
    "t",
    "s_x",
    "s_y",
    "o_x",
    "o_y",
    "og_x",
    "og_y",
    "omega0_cmd",
    "error",
];

pub fn write_control_log<W: std::io::Write>(rows: &[ControlLogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONTROL_LOG_CSV_HEADER)?;
    for r in rows {
        w.write_record(
            [
                r.t,
                r.s.x,
                r.s.y,
                r.o.x,
                r.o.y,
                r.o_g.x,
                r.o_g.y,
                r.omega0_cmd,
                r.error,
            ]
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// How one waypoint ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointOutcome {
    pub target: Vec3,
    /// Time the trigger fired (s).
    pub triggered_at: f64,
    /// Time the robot came to rest, for stops (s).
    pub settled_at: Option<f64>,
    /// Shell centre at the end of the manoeuvre (m).
    pub position: Vec3,
    /// Planar distance from the target at the end (m).
    pub distance: f64,
}

/// Speed under which the robot counts as resting (m/s).
pub const REST_SPEED: f64 = 1e-3;
/// Time the robot must stay under [`REST_SPEED`] (s).
pub const REST_HOLD: f64 = 2.0;

pub struct ClosedLoop {
    controller: Controller,
    sim: Simulator,
    drive: DriveProfile,
    state: ControllerState,
    disturbance: Disturbance,
    rng: ChaCha8Rng,
    steps_per_tick: u64,
    log: Vec<ControlLogRow>,
    samples: Vec<TrajectorySample>,
}

impl ClosedLoop {
    pub fn new(
        params: RobotParams,
        controller: Controller,
        start: ShellState,
        opts: SimOptions,
        disturbance: Disturbance,
        seed: u64,
    ) -> Result<Self> {
        disturbance.validate()?;
        let period = controller.config().period();
        let steps = period / opts.dt;
        if (steps - steps.round()).abs() > 1e-9 || steps < 1.0 {
            return Err(Error::Config(format!(
                "control period {period} is not a whole number of steps of {}",
                opts.dt
            )));
        }
        let opts = SimOptions {
            external_force: opts.external_force + disturbance.slope_force,
            ..opts
        };
        let sim = Simulator::new(params, start, opts)?;
        let drive = DriveProfile::new(start.theta, start.theta_dot);
        let mut cl = Self {
            controller,
            sim,
            drive,
            state: ControllerState::at_rest(),
            disturbance,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps_per_tick: steps.round() as u64,
            log: Vec::new(),
            samples: Vec::new(),
        };
        let first = cl.sim.sample(&cl.drive)?;
        cl.samples.push(first);
        Ok(cl)
    }

    pub fn time(&self) -> f64 {
        self.sim.time()
    }

    pub fn plant(&self) -> &ShellState {
        self.sim.state()
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn controller_state(&self) -> &ControllerState {
        &self.state
    }

    pub fn log(&self) -> &[ControlLogRow] {
        &self.log
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            dt: self.sim.options().dt,
            output_stride: self.controller.config().period(),
            samples: self.samples.clone(),
        }
    }

    fn measure(&mut self) -> Pose {
        let st = self.sim.state();
        let mut s = st.center;
        let mut gamma = st.axis_heading();
        if self.disturbance.position_noise > 0.0 {
            let n = Normal::new(0.0, self.disturbance.position_noise).expect("validated");
            s.x += n.sample(&mut self.rng);
            s.y += n.sample(&mut self.rng);
        }
        if self.disturbance.heading_noise > 0.0 {
            let n = Normal::new(0.0, self.disturbance.heading_noise).expect("validated");
            gamma += n.sample(&mut self.rng);
        }
        Pose::new(s, gamma, self.sim.time())
    }

    fn command(&mut self, target: f64, accel: f64) -> Result<()> {
        let t = self.sim.time();
        let current = self.drive.speed(t);
        if target != current {
            self.drive.push(DriveSegment {
                start: t,
                target,
                accel,
            })?;
        }
        Ok(())
    }

    fn advance_tick(&mut self) -> Result<()> {
        self.sim.advance(&self.drive, self.steps_per_tick)?;
        let sample = self.sim.sample(&self.drive)?;
        self.samples.push(sample);
        Ok(())
    }

    /// One control period; returns the pose the command was computed from.
    fn tick(&mut self, task: &WaypointTask) -> Result<Pose> {
        let pose = self.measure();
        let period = self.controller.config().period();
        let (next, cmd) = self
            .controller
            .control_step(&self.state, &pose, task, period)?;
        let gap = (cmd - self.drive.speed(pose.t)).abs();
        self.command(cmd, gap / period)?;
        self.log.push(ControlLogRow {
            t: pose.t,
            s: pose.s,
            o: next.center,
            o_g: task.center,
            omega0_cmd: cmd,
            error: next.last_error.unwrap_or(0.0),
        });
        self.state = next;
        self.advance_tick()?;
        Ok(pose)
    }

    /// Runs the loop on `task` for `duration` seconds.
    pub fn run_for(&mut self, task: &WaypointTask, duration: f64) -> Result<()> {
        let end = self.time() + duration;
        while self.time() < end - 1e-9 {
            self.tick(task)?;
        }
        Ok(())
    }

    /// Runs until the robot circles the task centre and the stop trigger
    /// fires, then stops the motor (for a stop) and waits for rest.
    pub fn run_waypoint(
        &mut self,
        task: &WaypointTask,
        horizon: f64,
        settle_limit: f64,
    ) -> Result<WaypointOutcome> {
        let deadline = self.time() + horizon;
        let dt_stop = self.controller.config().dt_stop;
        let triggered_at = loop {
            if self.time() > deadline {
                return Err(Error::NoConvergence {
                    iterations: self.log.len(),
                    residual: self.state.center.planar_distance(task.center),
                });
            }
            let pose = self.tick(task)?;
            if self.controller.captured(&self.state, task) {
                let qs = self.controller.steady_state(self.state.omega0_cmd)?;
                if crate::controller::stop_trigger(&pose, task, &qs, dt_stop) {
                    break self.time();
                }
            }
        };
        let mut settled_at = None;
        if task.directive == Directive::Stop {
            let decel = self.controller.config().stop_decel;
            self.command(0.0, decel)?;
            settled_at = Some(self.settle(settle_limit)?);
            self.state = ControllerState::at_rest();
        }
        let position = self.sim.state().center;
        Ok(WaypointOutcome {
            target: task.target,
            triggered_at,
            settled_at,
            position,
            distance: position.planar_distance(task.target),
        })
    }

    /// Advances with the motor held until the centre speed stays below
    /// [`REST_SPEED`] for [`REST_HOLD`] seconds; returns that time.
    pub fn settle(&mut self, limit: f64) -> Result<f64> {
        let deadline = self.time() + limit;
        let mut calm_since: Option<f64> = None;
        while self.time() < deadline {
            self.advance_tick()?;
            let last = self.samples.last().expect("at least one sample");
            let t = last.t;
            if last.center_velocity.norm() < REST_SPEED && self.drive.speed(t) == 0.0 {
                let since = *calm_since.get_or_insert(t);
                if t - since >= REST_HOLD {
                    return Ok(t);
                }
            } else {
                calm_since = None;
            }
        }
        Err(Error::NoConvergence {
            iterations: 0,
            residual: self.sim.state().omega.norm(),
        })
    }
}
