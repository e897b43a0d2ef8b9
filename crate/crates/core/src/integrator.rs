//! Fixed-step RK4 integration of the rolling shell under a driving-speed
//! profile.
//!
//! The integrated variables are the orientation `T` (with `Ṫ = [ω]T`), the
//! angular velocity `ω` and the shell centre `s`, whose rate is the no-slip
//! velocity `ω × R ẑ`. The pendulum angle is not integrated: it is read off
//! the [`DriveProfile`] at every stage time.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::drive::DriveProfile;
use crate::dynamics::{
    angular_acceleration, contact_force, damping_torque, inertial_term_h, pendulum_kinematics,
    ContactReport, MassKinematics, RobotParams, ShellState,
};
use crate::error::{Error, Result};
use crate::spatial::{orthonormalize, skew, Mat3, Vec3, ROTATION_REPAIR_LIMIT};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_OUTPUT_STRIDE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Integration step (s), in (0, 0.01].
    pub dt: f64,
    /// Spacing of recorded samples (s).
    pub output_stride: f64,
    /// Fail on a sample whose contact report has a false flag.
    pub strict_contact: bool,
    /// Apply the `−k₀ω` damping torque.
    pub damping: bool,
    /// Constant external force on the shell centre (N), e.g. a ground slope.
    pub external_force: Vec3,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            output_stride: DEFAULT_OUTPUT_STRIDE,
            strict_contact: false,
            damping: true,
            external_force: Vec3::ZERO,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(Error::Config(format!("dt = {} outside (0, 0.01]", self.dt)));
        }
        if !(self.output_stride >= self.dt) {
            return Err(Error::Config(format!(
                "output stride {} is shorter than dt {}",
                self.output_stride, self.dt
            )));
        }
        if !self.external_force.is_finite() {
            return Err(Error::Config("external force is not finite".into()));
        }
        Ok(())
    }

    fn stride_steps(&self) -> u64 {
        ((self.output_stride / self.dt).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Rates {
    orientation: Mat3,
    omega: Vec3,
    center: Vec3,
}

fn pendulum_at(p: &RobotParams, drive: &DriveProfile, t: f64) -> MassKinematics {
    let (theta, theta_dot, theta_ddot) = drive.kinematics(t);
    pendulum_kinematics(p, theta, theta_dot, theta_ddot)
}

fn external_torque(p: &RobotParams, opts: &SimOptions, omega: Vec3) -> Vec3 {
    if opts.damping {
        damping_torque(p, omega)
    } else {
        Vec3::ZERO
    }
}

fn rates(
    p: &RobotParams,
    drive: &DriveProfile,
    opts: &SimOptions,
    t: f64,
    orientation: Mat3,
    omega: Vec3,
) -> Result<Rates> {
    let mk = pendulum_at(p, drive, t);
    let st = ShellState {
        orientation,
        omega,
        center: Vec3::ZERO,
        theta: 0.0,
        theta_dot: 0.0,
    };
    let omega_dot = angular_acceleration(
        p,
        &st,
        &[mk],
        opts.external_force,
        external_torque(p, opts, omega),
    )?;
    Ok(Rates {
        orientation: skew(omega) * orientation,
        omega: omega_dot,
        center: omega.cross(Vec3::Z * p.radius),
    })
}

/// Advances `st` from `t` to `t + dt` with one classical RK4 step.
pub fn step(
    p: &RobotParams,
    st: &ShellState,
    drive: &DriveProfile,
    t: f64,
    opts: &SimOptions,
) -> Result<ShellState> {
    let dt = opts.dt;
    let k1 = rates(p, drive, opts, t, st.orientation, st.omega)?;
    let k2 = rates(
        p,
        drive,
        opts,
        t + 0.5 * dt,
        st.orientation + k1.orientation * (0.5 * dt),
        st.omega + k1.omega * (0.5 * dt),
    )?;
    let k3 = rates(
        p,
        drive,
        opts,
        t + 0.5 * dt,
        st.orientation + k2.orientation * (0.5 * dt),
        st.omega + k2.omega * (0.5 * dt),
    )?;
    let k4 = rates(
        p,
        drive,
        opts,
        t + dt,
        st.orientation + k3.orientation * dt,
        st.omega + k3.omega * dt,
    )?;
    let w = dt / 6.0;
    let orientation = st.orientation
        + (k1.orientation + k2.orientation * 2.0 + k3.orientation * 2.0 + k4.orientation) * w;
    let drift = orientation.orthonormality_error();
    if drift > ROTATION_REPAIR_LIMIT {
        return Err(Error::InvalidState(format!(
            "orientation drifted {drift:e} from the rotation group in one step"
        )));
    }
    let (theta, theta_dot, _) = drive.kinematics(t + dt);
    let next = ShellState {
        orientation: orthonormalize(&orientation)?,
        omega: st.omega + (k1.omega + k2.omega * 2.0 + k3.omega * 2.0 + k4.omega) * w,
        center: st.center + (k1.center + k2.center * 2.0 + k3.center * 2.0 + k4.center) * w,
        theta,
        theta_dot,
    };
    if !(next.omega.is_finite() && next.center.is_finite()) {
        return Err(Error::InvalidState("state became non-finite".into()));
    }
    if opts.strict_contact {
        let ev = evaluate(p, &next, drive, t + dt, opts)?;
        if !ev.contact.is_valid() {
            let f = ev.contact.force;
            return Err(Error::ContactViolation {
                t: t + dt,
                nx: f.x,
                ny: f.y,
                nz: f.z,
            });
        }
    }
    Ok(next)
}

/// Instantaneous accelerations and contact force at a state.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub omega_dot: Vec3,
    pub center_velocity: Vec3,
    pub center_acceleration: Vec3,
    /// Acceleration of the pendulum mass relative to the shell centre.
    pub pendulum_acceleration: Vec3,
    pub contact: ContactReport,
}

pub fn evaluate(
    p: &RobotParams,
    st: &ShellState,
    drive: &DriveProfile,
    t: f64,
    opts: &SimOptions,
) -> Result<Evaluation> {
    let mk = pendulum_at(p, drive, t);
    let omega_dot = angular_acceleration(
        p,
        st,
        &[mk],
        opts.external_force,
        external_torque(p, opts, st.omega),
    )?;
    let lever = Vec3::Z * p.radius;
    let center_acceleration = omega_dot.cross(lever);
    let pendulum_acceleration = omega_dot.cross(st.orientation * mk.r_body)
        + inertial_term_h(st.omega, &st.orientation, &mk);
    Ok(Evaluation {
        omega_dot,
        center_velocity: st.omega.cross(lever),
        center_acceleration,
        pendulum_acceleration,
        contact: contact_force(
            p,
            center_acceleration,
            pendulum_acceleration,
            opts.external_force,
        ),
    })
}

/// Kinetic plus gravitational potential energy (J), potential measured from the ground.
pub fn mechanical_energy(p: &RobotParams, st: &ShellState, drive: &DriveProfile, t: f64) -> f64 {
    let mk = pendulum_at(p, drive, t);
    let s_dot = st.omega.cross(Vec3::Z * p.radius);
    let r = st.orientation * mk.r_body;
    let r_dot = st.omega.cross(r) + st.orientation * mk.r_body_dot;
    let v_mass = s_dot + r_dot;
    0.5 * p.carried_mass() * s_dot.norm_squared()
        + 0.5 * p.shell_inertia * st.omega.norm_squared()
        + 0.5 * p.pendulum_mass * v_mass.norm_squared()
        + p.carried_mass() * p.gravity * st.center.z
        + p.pendulum_mass * p.gravity * (st.center.z + r.z)
}

/// Power balance terms at a state: `(motor, damping, external)` in W.
///
/// The motor does work through the arm force on the mass moving relative to
/// the shell; the rolling contact does no work.
pub fn power_terms(
    p: &RobotParams,
    st: &ShellState,
    drive: &DriveProfile,
    t: f64,
    opts: &SimOptions,
) -> Result<(f64, f64, f64)> {
    let ev = evaluate(p, st, drive, t, opts)?;
    let mk = pendulum_at(p, drive, t);
    let arm_force =
        (ev.center_acceleration + ev.pendulum_acceleration + Vec3::Z * p.gravity) * p.pendulum_mass;
    let motor = arm_force.dot(st.orientation * mk.r_body_dot);
    let damping = external_torque(p, opts, st.omega).dot(st.omega);
    let external = opts.external_force.dot(ev.center_velocity);
    Ok((motor, damping, external))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: ShellState,
    pub center_velocity: Vec3,
    pub contact: ContactReport,
}

impl TrajectorySample {
    /// `‖ṡ − ω × R ẑ‖` recomputed from the recorded values.
    pub fn slip_residual(&self, p: &RobotParams) -> f64 {
        (self.center_velocity - self.state.omega.cross(Vec3::Z * p.radius)).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub output_stride: f64,
    pub samples: Vec<TrajectorySample>,
}

pub const TRAJECTORY_CSV_HEADER: [&str; 7] = [
    "t",
    "x",
    "y",
    "heading",
    "omega0",
    "normal_positive",
    "within_friction_cone",
];

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples
            .last()
            .expect("trajectory always holds the initial sample")
    }

    /// Samples with `t ≥ t_end − window`.
    pub fn tail(&self, window: f64) -> &[TrajectorySample] {
        let t_end = self.last().t;
        let start = self
            .samples
            .partition_point(|s| s.t < t_end - window - 1e-9);
        &self.samples[start..]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRAJECTORY_CSV_HEADER)?;
        for s in &self.samples {
            w.write_record([
                format!("{}", s.t),
                format!("{}", s.state.center.x),
                format!("{}", s.state.center.y),
                format!("{}", s.state.axis_heading()),
                format!("{}", s.state.theta_dot),
                (s.contact.normal_positive as u8).to_string(),
                (s.contact.within_friction_cone as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stateful stepping for callers that change the drive while running
/// (the closed-loop harness). Time is tracked as an integer step count.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: RobotParams,
    opts: SimOptions,
    state: ShellState,
    t0: f64,
    steps: u64,
}

impl Simulator {
    pub fn new(params: RobotParams, initial: ShellState, opts: SimOptions) -> Result<Self> {
        params.validate()?;
        opts.validate()?;
        initial.validate(&params)?;
        Ok(Self {
            params,
            opts,
            state: initial,
            t0: 0.0,
            steps: 0,
        })
    }

    pub fn starting_at(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.steps as f64 * self.opts.dt
    }

    pub fn state(&self) -> &ShellState {
        &self.state
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn options(&self) -> &SimOptions {
        &self.opts
    }

    pub fn set_external_force(&mut self, f: Vec3) {
        self.opts.external_force = f;
    }

    pub fn advance(&mut self, drive: &DriveProfile, n_steps: u64) -> Result<()> {
        for _ in 0..n_steps {
            let t = self.time();
            self.state = step(&self.params, &self.state, drive, t, &self.opts).map_err(|e| {
                Error::Simulation {
                    t,
                    source: Box::new(e),
                }
            })?;
            self.steps += 1;
        }
        Ok(())
    }

    pub fn sample(&self, drive: &DriveProfile) -> Result<TrajectorySample> {
        let t = self.time();
        let ev = evaluate(&self.params, &self.state, drive, t, &self.opts).map_err(|e| {
            Error::Simulation {
                t,
                source: Box::new(e),
            }
        })?;
        Ok(TrajectorySample {
            t,
            state: self.state,
            center_velocity: ev.center_velocity,
            contact: ev.contact,
        })
    }
}

/// Integrates for `duration` seconds, recording a sample every output stride.
pub fn simulate(
    p: &RobotParams,
    initial: &ShellState,
    drive: &DriveProfile,
    duration: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(duration >= 0.0) {
        return Err(Error::Config(format!(
            "duration must be non-negative, got {duration}"
        )));
    }
    let mut sim = Simulator::new(*p, *initial, *opts)?;
    let total = (duration / opts.dt).round() as u64;
    let stride = opts.stride_steps();
    let mut samples = Vec::with_capacity((total / stride + 1) as usize);
    samples.push(sim.sample(drive)?);
    let mut done = 0;
    while done + stride <= total {
        sim.advance(drive, stride)?;
        done += stride;
        samples.push(sim.sample(drive)?);
    }
    Ok(Trajectory {
        dt: opts.dt,
        output_stride: stride as f64 * opts.dt,
        samples,
    })
}
