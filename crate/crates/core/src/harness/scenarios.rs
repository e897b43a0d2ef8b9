//! Scenario runners. Independent points run on the rayon pool; reports are
//! assembled in grid order so reruns are bit-identical.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{
    CircleSettings, OpenLoopSettings, Scenario, ScenarioConfig, WaypointSettings, WaypointSpeed,
};
use super::report::{Check, CirclePoint, OpenLoopPoint, RunReport, StopPoint};
use crate::closed_loop::{write_control_log, ClosedLoop};
use crate::controller::{Controller, Directive, WaypointTask};
use crate::drive::DriveProfile;
use crate::dynamics::ShellState;
use crate::error::{Error, Result};
use crate::fit::{fit_circle, fit_revolution};
use crate::integrator::{simulate, TrajectorySample};
use crate::quasistatic::{self, uniform_grid, Branch, QuasiStaticTable};
use crate::spatial::Vec3;
use crate::stability;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn label(x: f64) -> String {
    format!("{x:.4}").replace('.', "p").replace('-', "m")
}

/// Smallest vertical contact force and largest no-slip residual.
fn contact_stats(cfg: &ScenarioConfig, samples: &[TrajectorySample]) -> (f64, f64) {
    samples.iter().fold((f64::INFINITY, 0.0f64), |(n, s), x| {
        (n.min(x.contact.force.z), s.max(x.slip_residual(&cfg.robot)))
    })
}

fn contact_checks(report: &mut RunReport, min_normal: f64, max_slip: f64) {
    report.checks.push(Check::within(
        "min_normal_force",
        min_normal,
        Some(0.0),
        None,
    ));
    report
        .checks
        .push(Check::at_most("max_slip_residual", max_slip, 1e-12));
}

pub fn build_table(cfg: &ScenarioConfig) -> Result<QuasiStaticTable> {
    quasistatic::sweep(
        &cfg.robot,
        &uniform_grid(cfg.table.max_speed, cfg.table.points),
    )
}

/// Steady-state table over the configured grid, exported as CSV.
pub fn run_quasistatic_sweep(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut report = RunReport::new("quasistatic-sweep", cfg.seed);
    let table = build_table(cfg)?;
    let path = cfg.out_dir.join("quasistatic.csv");
    table.write_csv(create(&path)?)?;
    report.artifacts.push(path);
    let states = table.states();
    let static_error = (states[0].radius - cfg.robot.static_radius()).abs();
    report
        .checks
        .push(Check::at_most("static_radius_error_m", static_error, 1e-6));
    let increasing = states.windows(2).all(|w| w[1].radius > w[0].radius);
    report
        .checks
        .push(Check::flag("radius_strictly_increasing", increasing));
    report.checks.push(Check::within(
        "top_radius_m",
        states.last().unwrap().radius,
        None,
        None,
    ));
    let worst = states.iter().map(|s| s.residual).fold(0.0, f64::max);
    report.checks.push(Check::at_most(
        "max_residual",
        worst,
        quasistatic::RESIDUAL_TOLERANCE,
    ));
    Ok(report.finish())
}

/// Eigenvalue locus and recovery times over the configured grid.
pub fn run_stability_sweep(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut report = RunReport::new("stability-sweep", cfg.seed);
    let table = build_table(cfg)?;
    let reports = stability::sweep(&cfg.robot, table.states())?;
    let locus = cfg.out_dir.join("stability_eigenvalues.csv");
    stability::write_eigenvalue_csv(&reports, create(&locus)?)?;
    let summary = cfg.out_dir.join("stability_summary.csv");
    stability::write_summary_csv(&reports, create(&summary)?)?;
    report.artifacts.extend([locus, summary]);
    report
        .checks
        .push(Check::flag("all_stable", reports.iter().all(|r| r.stable)));
    let margin = reports
        .iter()
        .map(|r| r.dominant().re)
        .fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(Check::within(
        "max_nontrivial_real_part",
        margin,
        None,
        Some(0.0),
    ));
    let mid = 0.5 * cfg.table.max_speed;
    let nearest = reports
        .iter()
        .min_by(|a, b| {
            (a.drive_speed - mid)
                .abs()
                .total_cmp(&(b.drive_speed - mid).abs())
        })
        .unwrap();
    report
        .checks
        .push(Check::within("mid_range_tau_s", nearest.tau, None, None));
    Ok(report.finish())
}

fn open_loop_point(cfg: &ScenarioConfig, s: &OpenLoopSettings, w: f64) -> Result<OpenLoopPoint> {
    let p = &cfg.robot;
    let qs = quasistatic::solve(p, w, None, Branch::Normal)?;
    let drive = DriveProfile::ramp_from_rest(0.0, w, s.spin_up_accel)?;
    let duration = w / s.spin_up_accel + s.settle_time + s.fit_window;
    let traj = simulate(
        p,
        &ShellState::at_rest(p, 0.0, 0.0, 0.0),
        &drive,
        duration,
        &cfg.integrator,
    )?;
    let path = cfg.out_dir.join(format!("open_loop_{}.csv", label(w)));
    traj.write_csv(create(&path)?)?;
    let tail = traj.tail(s.fit_window);
    let fit = fit_revolution(tail);
    let (fitted_radius, fitted_rate) = match (w > 0.0, fit) {
        (true, Ok(f)) => (Some(f.circle.radius), Some(f.angular_velocity)),
        (true, Err(e)) => return Err(e),
        (false, _) => (None, None),
    };
    let fitted_tilt = tail.iter().map(|x| x.state.axis_tilt()).sum::<f64>() / tail.len() as f64;
    let (min_normal_force, max_slip) = contact_stats(cfg, &traj.samples);
    Ok(OpenLoopPoint {
        drive_speed: w,
        predicted_radius: qs.radius,
        fitted_radius,
        predicted_rate: qs.revolve_rate,
        fitted_rate,
        predicted_tilt: qs.axis_tilt,
        fitted_tilt,
        min_normal_force,
        max_slip,
        trajectory: path,
    })
}

/// Constant-speed runs compared against steady-state predictions.
pub fn run_open_loop(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let Scenario::OpenLoopSweep(s) = &cfg.scenario else {
        return Err(Error::SchemaMismatch(
            "config scenario is not open-loop-sweep".into(),
        ));
    };
    let mut report = RunReport::new("open-loop-sweep", cfg.seed);
    let results: Vec<(f64, Result<OpenLoopPoint>)> = s
        .grid
        .par_iter()
        .map(|&w| (w, open_loop_point(cfg, s, w)))
        .collect();
    let tol = &cfg.tolerances;
    let (mut min_normal, mut max_slip) = (f64::INFINITY, 0.0f64);
    for (w, r) in results {
        match r {
            Ok(pt) => {
                let tag = format!("omega0={w:.4}");
                if let (Some(r), Some(o)) = (pt.fitted_radius, pt.fitted_rate) {
                    let rel = |a: f64, b: f64| ((a - b) / b).abs();
                    report.checks.push(Check::at_most(
                        format!("{tag} radius_relative_error"),
                        rel(r, pt.predicted_radius),
                        tol.open_loop_relative,
                    ));
                    report.checks.push(Check::at_most(
                        format!("{tag} rate_relative_error"),
                        rel(o, pt.predicted_rate),
                        tol.open_loop_relative,
                    ));
                }
                report.checks.push(Check::at_most(
                    format!("{tag} tilt_error_deg"),
                    (pt.fitted_tilt - pt.predicted_tilt).abs().to_degrees(),
                    tol.open_loop_tilt_deg,
                ));
                min_normal = min_normal.min(pt.min_normal_force);
                max_slip = max_slip.max(pt.max_slip);
                report.artifacts.push(pt.trajectory.clone());
                report.open_loop.push(pt);
            }
            Err(e) => report.failures.push(format!("omega0 = {w}: {e}")),
        }
    }
    contact_checks(&mut report, min_normal, max_slip);
    let path = cfg.out_dir.join("open_loop_comparison.csv");
    write_comparison(&report.open_loop, &path)?;
    report.artifacts.push(path);
    Ok(report.finish())
}

pub const COMPARISON_CSV_HEADER: [&str; 7] = [
    "omega0",
    "R0_predicted",
    "R0_fitted",
    "Omega_predicted",
    "Omega_fitted",
    "xi_predicted",
    "xi_fitted",
];

fn write_comparison(points: &[OpenLoopPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(COMPARISON_CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for p in points {
        w.write_record([
            p.drive_speed.to_string(),
            p.predicted_radius.to_string(),
            opt(p.fitted_radius),
            p.predicted_rate.to_string(),
            opt(p.fitted_rate),
            p.predicted_tilt.to_string(),
            p.fitted_tilt.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn controller(cfg: &ScenarioConfig, table: &Arc<QuasiStaticTable>) -> Result<Controller> {
    Controller::new(cfg.controller, Arc::clone(table))
}

fn circle_point(
    cfg: &ScenarioConfig,
    s: &CircleSettings,
    table: &Arc<QuasiStaticTable>,
    index: usize,
) -> Result<CirclePoint> {
    let p = cfg.robot;
    let target = s.targets[index];
    let center = Vec3::new(target.center[0], target.center[1], p.radius);
    let start = ShellState::at_rest(&p, s.start[0], s.start[1], s.start_heading);
    let ctl = controller(cfg, table)?;
    let capture_tolerance = ctl.config().capture_tolerance;
    let mut cl = ClosedLoop::new(p, ctl, start, cfg.integrator, cfg.disturbance, cfg.seed)?;
    let task = WaypointTask::orbit(center, target.radius);
    let mut capture_time = None;
    while cl.time() < s.horizon - 1e-9 {
        cl.run_for(&task, cfg.controller.period())?;
        let cs = cl.controller_state();
        if capture_time.is_none() && cs.center.planar_distance(center) <= capture_tolerance {
            capture_time = Some(cl.time());
        }
    }
    let initial_error = cl
        .log()
        .first()
        .map_or(0.0, |r| r.o.planar_distance(center));
    let approach_speed = capture_time.map(|t| (initial_error - capture_tolerance).max(0.0) / t);
    let window_start = s.horizon - s.fit_window;
    let tail: Vec<Vec3> = cl
        .samples()
        .iter()
        .filter(|x| x.t >= window_start)
        .map(|x| x.state.center)
        .collect();
    let fit = fit_circle(&tail)?;
    let name = format!("circle_{index}_r{}", label(target.radius));
    let trajectory = cfg.out_dir.join(format!("{name}_trajectory.csv"));
    cl.trajectory().write_csv(create(&trajectory)?)?;
    let control_log = cfg.out_dir.join(format!("{name}_control.csv"));
    write_control_log(cl.log(), create(&control_log)?)?;
    let (min_normal_force, max_slip) = contact_stats(cfg, cl.samples());
    Ok(CirclePoint {
        target_center: target.center,
        target_radius: target.radius,
        fitted_center: [fit.center.x, fit.center.y],
        fitted_radius: fit.radius,
        center_error: fit.center.planar_distance(center),
        radius_error: (fit.radius - target.radius).abs() / target.radius,
        capture_time,
        approach_speed,
        min_normal_force,
        max_slip,
        trajectory,
        control_log,
    })
}

/// Closed-loop circling about each configured target.
pub fn run_circle(cfg: &ScenarioConfig) -> Result<RunReport> {
    run_circle_with_table(cfg, &Arc::new(build_table(cfg)?))
}

pub fn run_circle_with_table(
    cfg: &ScenarioConfig,
    table: &Arc<QuasiStaticTable>,
) -> Result<RunReport> {
    cfg.validate()?;
    let Scenario::Circle(s) = &cfg.scenario else {
        return Err(Error::SchemaMismatch(
            "config scenario is not circle".into(),
        ));
    };
    let mut report = RunReport::new("circle", cfg.seed);
    let results: Vec<Result<CirclePoint>> = (0..s.targets.len())
        .into_par_iter()
        .map(|k| circle_point(cfg, s, table, k))
        .collect();
    let tol = &cfg.tolerances;
    let (mut min_normal, mut max_slip) = (f64::INFINITY, 0.0f64);
    for (k, r) in results.into_iter().enumerate() {
        let tag = format!("R_g={:.2}", s.targets[k].radius);
        match r {
            Ok(pt) => {
                report.checks.push(Check::at_most(
                    format!("{tag} radius_relative_error"),
                    pt.radius_error,
                    tol.circle_radius_relative,
                ));
                report.checks.push(Check::at_most(
                    format!("{tag} center_error_m"),
                    pt.center_error,
                    tol.circle_center,
                ));
                match pt.approach_speed {
                    Some(v) => report.checks.push(Check::within(
                        format!("{tag} approach_speed_m_per_s"),
                        v,
                        Some(tol.approach_speed_min),
                        Some(tol.approach_speed_max),
                    )),
                    None => report
                        .failures
                        .push(format!("{tag}: centre never captured")),
                }
                min_normal = min_normal.min(pt.min_normal_force);
                max_slip = max_slip.max(pt.max_slip);
                report
                    .artifacts
                    .extend([pt.trajectory.clone(), pt.control_log.clone()]);
                report.circles.push(pt);
            }
            Err(e) => report.failures.push(format!("{tag}: {e}")),
        }
    }
    contact_checks(&mut report, min_normal, max_slip);
    Ok(report.finish())
}

/// Sequential waypoints with stop manoeuvres.
pub fn run_waypoints(cfg: &ScenarioConfig) -> Result<RunReport> {
    run_waypoints_with_table(cfg, &Arc::new(build_table(cfg)?))
}

pub fn run_waypoints_with_table(
    cfg: &ScenarioConfig,
    table: &Arc<QuasiStaticTable>,
) -> Result<RunReport> {
    cfg.validate()?;
    let Scenario::Waypoints(s) = &cfg.scenario else {
        return Err(Error::SchemaMismatch(
            "config scenario is not waypoints".into(),
        ));
    };
    let mut report = RunReport::new("waypoints", cfg.seed);
    let p = cfg.robot;
    let ctl = controller(cfg, table)?;
    let start = ShellState::at_rest(&p, s.start[0], s.start[1], s.start_heading);
    let mut cl = ClosedLoop::new(
        p,
        ctl.clone(),
        start,
        cfg.integrator,
        cfg.disturbance,
        cfg.seed,
    )?;
    let result = drive_waypoints(&mut cl, &ctl, s, &mut report);
    if let Err(e) = result {
        report.failures.push(e.to_string());
    }
    for (k, stop) in report.stops.iter().enumerate() {
        if stop.stop {
            let check = Check::at_most(
                format!("waypoint {k} stop_distance_m"),
                stop.distance,
                cfg.tolerances.stop_distance,
            );
            report.checks.push(check);
        }
    }
    let (min_normal, max_slip) = contact_stats(cfg, cl.samples());
    contact_checks(&mut report, min_normal, max_slip);
    let trajectory = cfg.out_dir.join("waypoints_trajectory.csv");
    cl.trajectory().write_csv(create(&trajectory)?)?;
    let control = cfg.out_dir.join("waypoints_control.csv");
    write_control_log(cl.log(), create(&control)?)?;
    report.waypoint_trajectory = Some(trajectory.clone());
    report.artifacts.extend([trajectory, control]);
    Ok(report.finish())
}

fn drive_waypoints(
    cl: &mut ClosedLoop,
    ctl: &Controller,
    s: &WaypointSettings,
    report: &mut RunReport,
) -> Result<()> {
    let height = cl.plant().center.z;
    for (k, wp) in s.waypoints.iter().enumerate() {
        let target = Vec3::new(wp.x, wp.y, height);
        let approach = target - cl.plant().center;
        let directive = match wp.speed {
            WaypointSpeed::Stop(_) => Directive::Stop,
            WaypointSpeed::Crossing(v) => {
                let d = approach.horizontal();
                if d.norm() == 0.0 {
                    return Err(Error::DegenerateInput(format!(
                        "waypoint {k} coincides with the robot"
                    )));
                }
                Directive::Cross(d * (v / d.norm()))
            }
        };
        let task = ctl.plan_waypoint(target, directive, approach)?;
        let outcome = cl
            .run_waypoint(&task, s.horizon, s.settle_limit)
            .map_err(|e| Error::Config(format!("waypoint {k} not reached: {e}")))?;
        report.stops.push(StopPoint {
            target: [wp.x, wp.y],
            stop: directive == Directive::Stop,
            position: [outcome.position.x, outcome.position.y],
            distance: outcome.distance,
            triggered_at: outcome.triggered_at,
            settled_at: outcome.settled_at,
        });
    }
    Ok(())
}

/// Runs whichever scenario the config names.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    match cfg.scenario {
        Scenario::OpenLoopSweep(_) => run_open_loop(cfg),
        Scenario::Circle(_) => run_circle(cfg),
        Scenario::Waypoints(_) => run_waypoints(cfg),
    }
}

/// Writes `report.json` under the output directory and returns its path.
pub fn write_report(cfg: &ScenarioConfig, report: &RunReport) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(format!("{}_report.json", report.scenario));
    report.write_json(&path)?;
    Ok(path)
}
