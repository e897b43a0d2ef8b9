//! Driving-speed profiles. The motor is an ideal velocity source: at each
//! segment start it ramps towards the segment's target speed at the
//! segment's acceleration, then holds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    /// Time the segment takes effect (s).
    pub start: f64,
    /// Speed to ramp to (rad/s).
    pub target: f64,
    /// Magnitude of the ramp acceleration (rad/s²).
    pub accel: f64,
}

/// Piece of constant acceleration: valid from `t0` until the next piece.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    t0: f64,
    theta0: f64,
    speed0: f64,
    accel: f64,
}

impl Piece {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let dt = t - self.t0;
        (
            self.theta0 + self.speed0 * dt + 0.5 * self.accel * dt * dt,
            self.speed0 + self.accel * dt,
            self.accel,
        )
    }
}

/// Pendulum angle θ(t) with its first two derivatives, piecewise quadratic.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveProfile {
    segments: Vec<DriveSegment>,
    pieces: Vec<Piece>,
}

impl DriveProfile {
    /// Holds `speed` from t = 0 with the pendulum starting at `theta`.
    pub fn new(theta: f64, speed: f64) -> Self {
        Self {
            segments: Vec::new(),
            pieces: vec![Piece {
                t0: 0.0,
                theta0: theta,
                speed0: speed,
                accel: 0.0,
            }],
        }
    }

    /// Constant speed for all time.
    pub fn constant(theta: f64, speed: f64) -> Self {
        Self::new(theta, speed)
    }

    /// Starts at rest and ramps to `target` at `accel` from t = 0.
    pub fn ramp_from_rest(theta: f64, target: f64, accel: f64) -> Result<Self> {
        let mut d = Self::new(theta, 0.0);
        d.push(DriveSegment {
            start: 0.0,
            target,
            accel,
        })?;
        Ok(d)
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    /// Appends a segment. Starts must be strictly increasing; a segment
    /// overrides whatever ramp was still in progress.
    pub fn push(&mut self, seg: DriveSegment) -> Result<()> {
        if !(seg.start.is_finite() && seg.target.is_finite() && seg.accel.is_finite()) {
            return Err(Error::Config("drive segment has non-finite fields".into()));
        }
        if seg.start < 0.0 {
            return Err(Error::Config(format!(
                "drive segment starts before t = 0 ({})",
                seg.start
            )));
        }
        if let Some(last) = self.segments.last() {
            if seg.start <= last.start {
                return Err(Error::Config(format!(
                    "drive segment start {} does not follow {}",
                    seg.start, last.start
                )));
            }
        }
        let (theta, speed, _) = self.kinematics(seg.start);
        let gap = seg.target - speed;
        if gap != 0.0 && seg.accel == 0.0 {
            return Err(Error::Config(
                "speed change requested with zero acceleration".into(),
            ));
        }
        let keep = self.pieces.partition_point(|pc| pc.t0 < seg.start).max(1);
        self.pieces.truncate(keep);
        if self.pieces.len() == 1 && self.pieces[0].t0 >= seg.start {
            self.pieces.clear();
        }
        if gap == 0.0 {
            self.pieces.push(Piece {
                t0: seg.start,
                theta0: theta,
                speed0: speed,
                accel: 0.0,
            });
        } else {
            let accel = seg.accel.abs() * gap.signum();
            let duration = gap.abs() / seg.accel.abs();
            let ramp = Piece {
                t0: seg.start,
                theta0: theta,
                speed0: speed,
                accel,
            };
            let end = seg.start + duration;
            let (theta_end, _, _) = ramp.eval(end);
            self.pieces.push(ramp);
            self.pieces.push(Piece {
                t0: end,
                theta0: theta_end,
                speed0: seg.target,
                accel: 0.0,
            });
        }
        self.segments.push(seg);
        Ok(())
    }

    /// `(θ, θ̇, θ̈)` at time `t`; accelerations are right-continuous.
    pub fn kinematics(&self, t: f64) -> (f64, f64, f64) {
        let idx = self
            .pieces
            .partition_point(|pc| pc.t0 <= t)
            .saturating_sub(1);
        self.pieces[idx].eval(t)
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.kinematics(t).1
    }

    pub fn max_abs_accel(&self) -> f64 {
        self.pieces
            .iter()
            .map(|pc| pc.accel.abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, accel_limit: f64) -> Result<()> {
        let worst = self.max_abs_accel();
        if worst > accel_limit {
            return Err(Error::Config(format!(
                "drive acceleration {worst} exceeds limit {accel_limit}"
            )));
        }
        Ok(())
    }
}
