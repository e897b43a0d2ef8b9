//! Configuration, scenario orchestration and reporting behind the CLI.

pub mod config;
pub mod report;
pub mod scenarios;

pub use config::{Scenario, ScenarioConfig, ScenarioKind, SCHEMA};
pub use report::{compare, Check, RunReport};
pub use scenarios::{
    run_circle, run_open_loop, run_quasistatic_sweep, run_scenario, run_stability_sweep,
    run_waypoints, write_report,
};
