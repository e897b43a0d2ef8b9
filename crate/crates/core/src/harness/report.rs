//! Run reports: metrics, pass/fail checks and artifact paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, min: Option<f64>, max: Option<f64>) -> Self {
        let passed =
            value.is_finite() && min.is_none_or(|m| value >= m) && max.is_none_or(|m| value <= m);
        Self {
            name: name.into(),
            value,
            min,
            max,
            passed,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self::within(name, value, None, Some(max))
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: ok as u8 as f64,
            min: Some(1.0),
            max: None,
            passed: ok,
        }
    }
}

/// One constant-speed run against its steady-state prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopPoint {
    pub drive_speed: f64,
    pub predicted_radius: f64,
    pub fitted_radius: Option<f64>,
    pub predicted_rate: f64,
    pub fitted_rate: Option<f64>,
    pub predicted_tilt: f64,
    pub fitted_tilt: f64,
    pub min_normal_force: f64,
    pub max_slip: f64,
    pub trajectory: PathBuf,
}

/// One closed-loop circling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirclePoint {
    pub target_center: [f64; 2],
    pub target_radius: f64,
    pub fitted_center: [f64; 2],
    pub fitted_radius: f64,
    pub center_error: f64,
    pub radius_error: f64,
    pub capture_time: Option<f64>,
    pub approach_speed: Option<f64>,
    pub min_normal_force: f64,
    pub max_slip: f64,
    pub trajectory: PathBuf,
    pub control_log: PathBuf,
}

/// One waypoint of a waypoint run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopPoint {
    pub target: [f64; 2],
    pub stop: bool,
    pub position: [f64; 2],
    pub distance: f64,
    pub triggered_at: f64,
    pub settled_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub open_loop: Vec<OpenLoopPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub circles: Vec<CirclePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stops: Vec<StopPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoint_trajectory: Option<PathBuf>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            passed: false,
            checks: Vec::new(),
            open_loop: Vec::new(),
            circles: Vec::new(),
            stops: Vec::new(),
            waypoint_trajectory: None,
            failures: Vec::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Sets `passed` from the checks and failures.
    pub fn finish(mut self) -> Self {
        self.passed = self.failures.is_empty() && self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// One line per check, then failures.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} (seed {}): {}\n",
            self.scenario,
            self.seed,
            if self.passed { "PASS" } else { "FAIL" }
        );
        for c in &self.checks {
            let bounds = match (c.min, c.max) {
                (Some(lo), Some(hi)) => format!("in [{lo:.4}, {hi:.4}]"),
                (Some(lo), None) => format!(">= {lo:.4}"),
                (None, Some(hi)) => format!("<= {hi:.4}"),
                (None, None) => String::new(),
            };
            out += &format!(
                "  [{}] {} = {:.6} {}\n",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.value,
                bounds
            );
        }
        for f in &self.failures {
            out += &format!("  failure: {f}\n");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Difference {
    pub name: String,
    pub reference: Option<f64>,
    pub candidate: Option<f64>,
}

/// Checks whose values differ by more than `relative` (relative to the
/// reference magnitude, floored at 1), or that appear in only one report.
pub fn compare(reference: &RunReport, candidate: &RunReport, relative: f64) -> Vec<Difference> {
    let mut diffs = Vec::new();
    for r in &reference.checks {
        match candidate.check(&r.name) {
            Some(c) => {
                let scale = r.value.abs().max(1.0);
                if !((c.value - r.value).abs() <= relative * scale) || c.passed != r.passed {
                    diffs.push(Difference {
                        name: r.name.clone(),
                        reference: Some(r.value),
                        candidate: Some(c.value),
                    });
                }
            }
            None => diffs.push(Difference {
                name: r.name.clone(),
                reference: Some(r.value),
                candidate: None,
            }),
        }
    }
    for c in &candidate.checks {
        if reference.check(&c.name).is_none() {
            diffs.push(Difference {
                name: c.name.clone(),
                reference: None,
                candidate: Some(c.value),
            });
        }
    }
    diffs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_and_comparison() {
        let mut a = RunReport::new("circle", 1);
        a.checks.push(Check::at_most("err", 0.05, 0.1));
        a.checks
            .push(Check::within("speed", 0.02, Some(0.005), Some(0.08)));
        let a = a.finish();
        assert!(a.passed);
        let mut b = a.clone();
        b.checks[0] = Check::at_most("err", 0.2, 0.1);
        let b = b.finish();
        assert!(!b.passed);
        assert!(compare(&a, &a, 0.0).is_empty());
        let d = compare(&a, &b, 1e-3);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].name, "err");
        assert!(!Check::at_most("nan", f64::NAN, 1.0).passed);
    }
}
