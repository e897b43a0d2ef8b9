//! Scenario configuration files.
//!
//! A config is a JSON object with a required `schema` tag and a required
//! `scenario`; every other section falls back to its defaults. Unknown
//! fields are collected as warnings so newer files still load.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::closed_loop::Disturbance;
use crate::controller::ControllerConfig;
use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::integrator::SimOptions;

pub const SCHEMA: &str = "rollsim-scenario/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    OpenLoopSweep,
    Circle,
    Waypoints,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::OpenLoopSweep => "open-loop-sweep",
            Self::Circle => "circle",
            Self::Waypoints => "waypoints",
        }
    }
}

/// Constant-speed runs from rest, one per grid speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenLoopSettings {
    /// Driving speeds (rad/s).
    pub grid: Vec<f64>,
    /// Motor acceleration for the spin-up from rest (rad/s²).
    pub spin_up_accel: f64,
    /// Time simulated after reaching speed before the fit window starts (s).
    pub settle_time: f64,
    /// Length of the window the circle is fitted on (s).
    pub fit_window: f64,
}

impl Default for OpenLoopSettings {
    fn default() -> Self {
        Self {
            grid: vec![0.0, 0.5 * PI, PI, 1.5 * PI, 2.0 * PI],
            spin_up_accel: 0.5,
            settle_time: 80.0,
            fit_window: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleTarget {
    /// Target revolving centre `[x, y]` (m).
    pub center: [f64; 2],
    /// Target revolving radius (m).
    pub radius: f64,
}

/// Closed-loop circling, one independent run per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircleSettings {
    pub targets: Vec<CircleTarget>,
    /// Start position `[x, y]` (m); the robot starts at rest.
    pub start: [f64; 2],
    /// Initial heading of the motor axis (rad).
    pub start_heading: f64,
    /// Simulated duration of each run (s).
    pub horizon: f64,
    /// Trailing window the steady circle is fitted on (s).
    pub fit_window: f64,
}

impl Default for CircleSettings {
    fn default() -> Self {
        Self {
            targets: [0.20, 0.35, 0.50, 0.65]
                .iter()
                .map(|&radius| CircleTarget {
                    center: [1.0, 0.0],
                    radius,
                })
                .collect(),
            start: [0.0, 0.0],
            start_heading: 0.0,
            horizon: 300.0,
            fit_window: 60.0,
        }
    }
}

/// `"stop"` in a waypoint's speed slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopKeyword {
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WaypointSpeed {
    /// Crossing speed (m/s) along the arrival direction.
    Crossing(f64),
    Stop(StopKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub speed: WaypointSpeed,
}

/// Sequential waypoints. The default is an "N" with 1 m sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaypointSettings {
    pub start: [f64; 2],
    pub start_heading: f64,
    pub waypoints: Vec<Waypoint>,
    /// Longest time allowed to reach each waypoint (s).
    pub horizon: f64,
    /// Longest time allowed to come to rest after a stop (s).
    pub settle_limit: f64,
}

impl Default for WaypointSettings {
    fn default() -> Self {
        let stop = WaypointSpeed::Stop(StopKeyword::Stop);
        Self {
            start: [-0.5, -0.5],
            start_heading: 0.0,
            waypoints: [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
                .iter()
                .map(|&(x, y)| Waypoint { x, y, speed: stop })
                .collect(),
            horizon: 600.0,
            settle_limit: 120.0,
        }
    }
}

/// Closest a circle run may start to its setpoint (m).
pub const MIN_CIRCLE_START_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    OpenLoopSweep(OpenLoopSettings),
    Circle(CircleSettings),
    Waypoints(WaypointSettings),
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Self::OpenLoopSweep(_) => ScenarioKind::OpenLoopSweep,
            Self::Circle(_) => ScenarioKind::Circle,
            Self::Waypoints(_) => ScenarioKind::Waypoints,
        }
    }

    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::OpenLoopSweep => Self::OpenLoopSweep(OpenLoopSettings::default()),
            ScenarioKind::Circle => Self::Circle(CircleSettings::default()),
            ScenarioKind::Waypoints => Self::Waypoints(WaypointSettings::default()),
        }
    }
}

/// Grid of the steady-state table the controller and comparisons use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableSettings {
    /// Highest tabulated driving speed (rad/s).
    pub max_speed: f64,
    pub points: usize,
}

impl Default for TableSettings {
    fn default() -> Self {
        Self {
            max_speed: 3.0 * PI,
            points: 50,
        }
    }
}

/// Pass/fail thresholds for run reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative error of fitted open-loop radius and revolving rate.
    pub open_loop_relative: f64,
    /// Error of the fitted axis tilt (degrees).
    pub open_loop_tilt_deg: f64,
    /// Relative error of the steady closed-loop radius.
    pub circle_radius_relative: f64,
    /// Distance of the steady closed-loop centre from its setpoint (m).
    pub circle_center: f64,
    /// Band for the mean approach speed of the revolving centre (m/s).
    pub approach_speed_min: f64,
    pub approach_speed_max: f64,
    /// Distance of a stop from its waypoint (m).
    pub stop_distance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            open_loop_relative: 0.02,
            open_loop_tilt_deg: 0.5,
            circle_radius_relative: 0.10,
            circle_center: 0.10,
            approach_speed_min: 0.005,
            approach_speed_max: 0.08,
            stop_distance: 0.07,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema: String,
    pub scenario: Scenario,
    #[serde(default)]
    pub robot: RobotParams,
    #[serde(default)]
    pub integrator: SimOptions,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub table: TableSettings,
    #[serde(default)]
    pub disturbance: Disturbance,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Seed for the disturbance noise.
    #[serde(default)]
    pub seed: u64,
    /// Directory artifacts are written to.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            scenario,
            robot: RobotParams::default(),
            integrator: SimOptions::default(),
            controller: ControllerConfig::default(),
            table: TableSettings::default(),
            disturbance: Disturbance::default(),
            tolerances: Tolerances::default(),
            seed: 0,
            out_dir: default_out_dir(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::SchemaMismatch(format!(
                "schema is {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        self.robot.validate()?;
        self.integrator.validate()?;
        self.controller.validate()?;
        self.disturbance.validate()?;
        if self.table.points < 3 || !(self.table.max_speed > 0.0) {
            return Err(Error::Config(
                "table needs at least 3 points and a positive top speed".into(),
            ));
        }
        match &self.scenario {
            Scenario::OpenLoopSweep(s) => {
                if s.grid.is_empty()
                    || s.grid
                        .iter()
                        .any(|w| !(*w >= 0.0 && *w <= self.table.max_speed))
                {
                    return Err(Error::Config(format!(
                        "open-loop grid must be non-empty within [0, {}]",
                        self.table.max_speed
                    )));
                }
                if !(s.spin_up_accel > 0.0 && s.settle_time >= 0.0 && s.fit_window > 0.0) {
                    return Err(Error::Config(
                        "open-loop timing fields must be positive".into(),
                    ));
                }
            }
            Scenario::Circle(s) => {
                if s.targets.is_empty() {
                    return Err(Error::Config("circle scenario has no targets".into()));
                }
                for t in &s.targets {
                    if (t.center[0] - s.start[0]).hypot(t.center[1] - s.start[1])
                        < MIN_CIRCLE_START_DISTANCE
                    {
                        return Err(Error::Config(format!(
                            "circle start must be at least {MIN_CIRCLE_START_DISTANCE} m from each setpoint"
                        )));
                    }
                    if !(t.radius >= self.controller.r_min && t.radius <= self.controller.r_max) {
                        return Err(Error::Config(format!(
                            "target radius {} outside [{}, {}]",
                            t.radius, self.controller.r_min, self.controller.r_max
                        )));
                    }
                }
                if !(s.fit_window > 0.0 && s.horizon > s.fit_window) {
                    return Err(Error::Config(
                        "circle horizon must exceed the fit window".into(),
                    ));
                }
            }
            Scenario::Waypoints(s) => {
                if s.waypoints.is_empty() {
                    return Err(Error::Config("waypoint scenario has no waypoints".into()));
                }
                if !(s.horizon > 0.0 && s.settle_limit > 0.0) {
                    return Err(Error::Config(
                        "waypoint time limits must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parses a config, returning it with one warning per ignored field.
    pub fn from_json(text: &str) -> Result<(Self, Vec<String>)> {
        let mut warnings = Vec::new();
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_ignored::deserialize(&mut de, |path| {
            warnings.push(format!("unknown field `{path}` ignored"));
        })
        .map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        de.end().map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        // Tagged enums buffer their content, hiding unknown keys from the
        // first pass; re-read the scenario object against its concrete type.
        let raw: serde_json::Value = serde_json::from_str(text)?;
        if let Some(obj) = raw.get("scenario").and_then(|v| v.as_object()) {
            let mut body = obj.clone();
            body.remove("kind");
            let body = serde_json::Value::Object(body);
            let mut note = |path: serde_ignored::Path| {
                warnings.push(format!("unknown field `scenario.{path}` ignored"));
            };
            let checked = match cfg.scenario.kind() {
                ScenarioKind::OpenLoopSweep => {
                    serde_ignored::deserialize::<_, _, OpenLoopSettings>(&body, &mut note).map(drop)
                }
                ScenarioKind::Circle => {
                    serde_ignored::deserialize::<_, _, CircleSettings>(&body, &mut note).map(drop)
                }
                ScenarioKind::Waypoints => {
                    serde_ignored::deserialize::<_, _, WaypointSettings>(&body, &mut note).map(drop)
                }
            };
            checked.map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        }
        cfg.validate()?;
        Ok((cfg, warnings))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::SchemaMismatch(msg) => {
                Error::SchemaMismatch(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        for kind in [
            ScenarioKind::OpenLoopSweep,
            ScenarioKind::Circle,
            ScenarioKind::Waypoints,
        ] {
            let cfg = ScenarioConfig::new(Scenario::default_for(kind));
            let text = cfg.to_json().unwrap();
            let (back, warnings) = ScenarioConfig::from_json(&text).unwrap();
            assert!(warnings.is_empty());
            assert_eq!(back, cfg);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn missing_field_is_named() {
        let err = ScenarioConfig::from_json(r#"{"scenario": {"kind": "circle"}}"#).unwrap_err();
        assert!(
            matches!(&err, Error::SchemaMismatch(m) if m.contains("`schema`")),
            "{err}"
        );
        let err = ScenarioConfig::from_json(&format!(r#"{{"schema": "{SCHEMA}"}}"#)).unwrap_err();
        assert!(err.to_string().contains("`scenario`"), "{err}");
    }

    #[test]
    fn unknown_fields_warn() {
        let text = format!(
            r#"{{"schema": "{SCHEMA}", "scenario": {{"kind": "circle", "colour": "red"}},
                "robot": {{"radius": 0.12, "paint": 1}}, "extra": true}}"#
        );
        let (cfg, warnings) = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(cfg.scenario.kind(), ScenarioKind::Circle);
        assert_eq!(warnings.len(), 3, "{warnings:?}");
        assert!(warnings.iter().any(|w| w.contains("robot.paint")));
        assert!(warnings.iter().any(|w| w.contains("scenario.colour")));
    }

    #[test]
    fn wrong_schema_and_bad_params_rejected() {
        let err =
            ScenarioConfig::from_json(r#"{"schema": "other/9", "scenario": {"kind": "circle"}}"#)
                .unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
        let text = format!(
            r#"{{"schema": "{SCHEMA}", "scenario": {{"kind": "circle"}}, "robot": {{"radius": -1.0}}}}"#
        );
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn waypoint_speed_forms() {
        let text = format!(
            r#"{{"schema": "{SCHEMA}", "scenario": {{"kind": "waypoints",
                "waypoints": [{{"x": 0, "y": 0, "speed": "stop"}}, {{"x": 1, "y": 0, "speed": 0.3}}]}}}}"#
        );
        let (cfg, _) = ScenarioConfig::from_json(&text).unwrap();
        let Scenario::Waypoints(w) = cfg.scenario else {
            panic!()
        };
        assert_eq!(w.waypoints[0].speed, WaypointSpeed::Stop(StopKeyword::Stop));
        assert_eq!(w.waypoints[1].speed, WaypointSpeed::Crossing(0.3));
    }
}
