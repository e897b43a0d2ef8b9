//! Equations of motion of a spherical shell rolling without slipping on a
//! horizontal plane, driven by point masses that move along prescribed
//! paths in the shell frame.
//!
//! Taking moments about the instantaneous contact point eliminates both the
//! ground reaction and the internal force between shell and masses, leaving a
//! 3×3 linear system for the shell's angular acceleration:
//!
//! ```text
//! (Σ m_q(u_q·u_q I − u_q u_qᵀ) + M R²(I − ẑẑᵀ) + I_s I) ω̇
//!     = Σ m_q u_q × (−h_q − g ẑ) + R ẑ × f + τ
//! ```
//!
//! where `u_q = R ẑ + T r′_q` points from the contact to mass `q` and `h_q`
//! is the part of that mass's acceleration that does not depend on `ω̇`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{rotation_y, rotation_z, Mat3, Vec3, ROTATION_TOLERANCE};

/// Conditioning estimate above which the contact inertia is treated as singular.
pub const MAX_INERTIA_CONDITION: f64 = 1e12;

/// Physical constants of the robot. Defaults are the built prototype's values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    /// Outer shell radius (m).
    pub radius: f64,
    /// Shell mass without beads (kg).
    pub shell_mass: f64,
    /// Shell moment of inertia about any axis through its centre (kg·m²).
    pub shell_inertia: f64,
    /// Angle between the motor axis and the arm to the pendulum mass (rad).
    pub cone_angle: f64,
    /// Distance from the shell centre to the pendulum mass (m).
    pub pendulum_distance: f64,
    /// Pendulum mass (kg).
    pub pendulum_mass: f64,
    /// Damping beads, lumped into the shell mass (kg).
    pub bead_mass: f64,
    /// Linear rotational damping coefficient k₀ (kg·m²/s).
    pub damping: f64,
    /// Ground friction coefficient; only used to flag cone violations.
    pub friction: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        let radius = 0.12;
        let shell_mass = 0.840;
        let bead_mass = 0.040;
        Self {
            radius,
            shell_mass,
            shell_inertia: 0.0053,
            cone_angle: std::f64::consts::FRAC_PI_4,
            pendulum_distance: 0.093,
            pendulum_mass: 0.306,
            bead_mass,
            damping: 0.4 * (shell_mass + bead_mass) * radius * radius,
            friction: 0.8,
            gravity: 9.81,
        }
    }
}

impl RobotParams {
    /// Mass that rolls with the shell (shell plus beads).
    pub fn carried_mass(&self) -> f64 {
        self.shell_mass + self.bead_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.carried_mass() + self.pendulum_mass
    }

    /// Radius of the static (zero-speed) revolving circle, `R·tan φ`.
    pub fn static_radius(&self) -> f64 {
        self.radius * self.cone_angle.tan()
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("radius", self.radius),
            ("shell_mass", self.shell_mass),
            ("shell_inertia", self.shell_inertia),
            ("cone_angle", self.cone_angle),
            ("pendulum_distance", self.pendulum_distance),
            ("pendulum_mass", self.pendulum_mass),
            ("bead_mass", self.bead_mass),
            ("damping", self.damping),
            ("friction", self.friction),
            ("gravity", self.gravity),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        for (name, v) in [
            ("radius", self.radius),
            ("shell_mass", self.shell_mass),
            ("shell_inertia", self.shell_inertia),
            ("pendulum_distance", self.pendulum_distance),
            ("pendulum_mass", self.pendulum_mass),
            ("gravity", self.gravity),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("bead_mass", self.bead_mass),
            ("damping", self.damping),
            ("friction", self.friction),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.pendulum_distance >= self.radius {
            return Err(Error::InvalidParams(format!(
                "pendulum_distance {} must be smaller than radius {}",
                self.pendulum_distance, self.radius
            )));
        }
        if !(self.cone_angle > 0.0 && self.cone_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParams(format!(
                "cone_angle {} must lie in (0, pi/2)",
                self.cone_angle
            )));
        }
        Ok(())
    }
}

/// Full mechanical state of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellState {
    /// Body-to-ground rotation.
    pub orientation: Mat3,
    /// Shell angular velocity, ground frame (rad/s).
    pub omega: Vec3,
    /// Shell centre; `center.z` equals the shell radius.
    pub center: Vec3,
    /// Pendulum angle about the body z axis (rad).
    pub theta: f64,
    /// Driving speed (rad/s).
    pub theta_dot: f64,
}

impl ShellState {
    /// Robot at rest with the pendulum hanging straight below the centre and
    /// the motor axis leaning towards `heading`.
    pub fn at_rest(p: &RobotParams, x: f64, y: f64, heading: f64) -> Self {
        Self {
            orientation: rotation_z(heading) * rotation_y(p.cone_angle),
            omega: Vec3::ZERO,
            center: Vec3::new(x, y, p.radius),
            theta: 0.0,
            theta_dot: 0.0,
        }
    }

    /// Motor axis (body z) in the ground frame.
    pub fn motor_axis(&self) -> Vec3 {
        self.orientation.column(2)
    }

    /// Angle between the motor axis and the vertical (rad).
    pub fn axis_tilt(&self) -> f64 {
        self.motor_axis().z.clamp(-1.0, 1.0).acos()
    }

    /// Planar heading of the motor axis; in steady revolving motion this is
    /// the direction from the curvature centre to the shell centre.
    pub fn axis_heading(&self) -> f64 {
        let a = self.motor_axis();
        a.y.atan2(a.x)
    }

    pub fn validate(&self, p: &RobotParams) -> Result<()> {
        if !self.orientation.is_rotation(ROTATION_TOLERANCE) {
            return Err(Error::InvalidState(format!(
                "orientation is not a rotation (orthonormality error {:e})",
                self.orientation.orthonormality_error()
            )));
        }
        if !(self.omega.is_finite() && self.center.is_finite())
            || !self.theta.is_finite()
            || !self.theta_dot.is_finite()
        {
            return Err(Error::InvalidState("non-finite state component".into()));
        }
        if self.center.z != p.radius {
            return Err(Error::InvalidState(format!(
                "shell centre height {} differs from radius {}",
                self.center.z, p.radius
            )));
        }
        Ok(())
    }
}

/// Body-frame position, velocity and acceleration of one internal point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassKinematics {
    pub r_body: Vec3,
    pub r_body_dot: Vec3,
    pub r_body_ddot: Vec3,
    pub mass: f64,
}

impl MassKinematics {
    /// Two masses of `mass / 2` at the same place behave like this one.
    pub fn split(self) -> [MassKinematics; 2] {
        let half = MassKinematics {
            mass: self.mass * 0.5,
            ..self
        };
        [half, half]
    }
}

/// Ground reaction (normal plus friction) and its validity flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub force: Vec3,
    pub normal_positive: bool,
    pub within_friction_cone: bool,
}

impl ContactReport {
    pub fn from_force(force: Vec3, friction: f64) -> Self {
        let nz = force.z;
        Self {
            force,
            normal_positive: nz > 0.0,
            within_friction_cone: nz / force.norm() >= 1.0 / (1.0 + friction * friction).sqrt(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.normal_positive && self.within_friction_cone
    }
}

/// Pendulum mass on its cone: `r′ = r₀(sinφ cosθ, sinφ sinθ, −cosφ)`.
pub fn pendulum_kinematics(
    p: &RobotParams,
    theta: f64,
    theta_dot: f64,
    theta_ddot: f64,
) -> MassKinematics {
    let (s, c) = theta.sin_cos();
    let ring = p.pendulum_distance * p.cone_angle.sin();
    let r_body = Vec3::new(
        ring * c,
        ring * s,
        -p.pendulum_distance * p.cone_angle.cos(),
    );
    let tangent = Vec3::new(-ring * s, ring * c, 0.0);
    let inward = Vec3::new(-ring * c, -ring * s, 0.0);
    MassKinematics {
        r_body,
        r_body_dot: tangent * theta_dot,
        r_body_ddot: inward * (theta_dot * theta_dot) + tangent * theta_ddot,
        mass: p.pendulum_mass,
    }
}

/// Acceleration of a point mass relative to the shell centre, excluding the
/// `ω̇ × r` part: `ω×(ω×Tr′) + 2ω×(Tṙ′) + Tr̈′`.
pub fn inertial_term_h(omega: Vec3, orientation: &Mat3, mk: &MassKinematics) -> Vec3 {
    let r = *orientation * mk.r_body;
    omega.cross(omega.cross(r))
        + 2.0 * omega.cross(*orientation * mk.r_body_dot)
        + *orientation * mk.r_body_ddot
}

/// Inertia of the whole robot about the contact point.
pub fn contact_inertia(p: &RobotParams, orientation: &Mat3, masses: &[MassKinematics]) -> Mat3 {
    let r = p.radius;
    let mut inertia = (Mat3::IDENTITY - Vec3::Z.outer(Vec3::Z)) * (p.carried_mass() * r * r)
        + Mat3::IDENTITY * p.shell_inertia;
    for mk in masses {
        let u = Vec3::Z * r + *orientation * mk.r_body;
        inertia = inertia + (Mat3::IDENTITY * u.norm_squared() - u.outer(u)) * mk.mass;
    }
    inertia
}

/// The merged equation of motion `inertia · ω̇ = torque`, both about the contact point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquationOfMotion {
    pub inertia: Mat3,
    pub torque: Vec3,
}

impl EquationOfMotion {
    pub fn assemble(
        p: &RobotParams,
        st: &ShellState,
        masses: &[MassKinematics],
        f_ext: Vec3,
        tau_ext: Vec3,
    ) -> Self {
        let down = Vec3::Z * -p.gravity;
        let mut torque = (Vec3::Z * p.radius).cross(f_ext) + tau_ext;
        for mk in masses {
            let u = Vec3::Z * p.radius + st.orientation * mk.r_body;
            let h = inertial_term_h(st.omega, &st.orientation, mk);
            torque += u.cross(down - h) * mk.mass;
        }
        Self {
            inertia: contact_inertia(p, &st.orientation, masses),
            torque,
        }
    }

    pub fn solve(&self) -> Result<Vec3> {
        let inverse = self
            .inertia
            .inverse()
            .ok_or(Error::SingularInertia(f64::INFINITY))?;
        let condition = self.inertia.frobenius_norm() * inverse.frobenius_norm();
        if !(condition <= MAX_INERTIA_CONDITION) {
            return Err(Error::SingularInertia(condition));
        }
        Ok(inverse * self.torque)
    }

    /// `inertia · ω̇ − torque` for a candidate angular acceleration.
    pub fn residual(&self, omega_dot: Vec3) -> Vec3 {
        self.inertia * omega_dot - self.torque
    }
}

/// Shell angular acceleration under the rolling constraint.
///
/// Damping is not included; callers pass `−k₀ω` through `tau_ext`.
pub fn angular_acceleration(
    p: &RobotParams,
    st: &ShellState,
    masses: &[MassKinematics],
    f_ext: Vec3,
    tau_ext: Vec3,
) -> Result<Vec3> {
    EquationOfMotion::assemble(p, st, masses, f_ext, tau_ext).solve()
}

pub fn damping_torque(p: &RobotParams, omega: Vec3) -> Vec3 {
    omega * -p.damping
}

/// Ground reaction `N = (M+m)s̈ + m r̈ + (M+m)g ẑ − f` and the no-jump /
/// no-slip flags.
pub fn contact_force(
    p: &RobotParams,
    s_ddot: Vec3,
    r_ddot_ground: Vec3,
    f_ext: Vec3,
) -> ContactReport {
    let total = p.total_mass();
    let force =
        s_ddot * total + r_ddot_ground * p.pendulum_mass + Vec3::Z * (total * p.gravity) - f_ext;
    ContactReport::from_force(force, p.friction)
}
