use rollsim::closed_loop::Disturbance;
use rollsim::harness::config::{CircleTarget, StopKeyword, Waypoint, WaypointSpeed};
use rollsim::harness::{run_circle, run_waypoints, Scenario, ScenarioConfig, ScenarioKind};
use rollsim::spatial::Vec3;

fn circle_config(dir: &std::path::Path, radius: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(Scenario::default_for(ScenarioKind::Circle));
    if let Scenario::Circle(s) = &mut cfg.scenario {
        s.targets = vec![CircleTarget {
            center: [1.0, 0.0],
            radius,
        }];
    }
    cfg.out_dir = dir.to_path_buf();
    cfg
}

#[test]
fn circle_holds_under_slope_and_pose_noise() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [7, 8] {
        let mut cfg = circle_config(dir.path(), 0.35);
        cfg.seed = seed;
        cfg.disturbance = Disturbance {
            slope_force: Vec3::new(0.04, -0.03, 0.0),
            position_noise: 0.003,
            heading_noise: 0.01,
        };
        let report = run_circle(&cfg).unwrap();
        assert!(report.passed, "seed {seed}\n{}", report.summary());
    }
}

#[test]
fn noisy_runs_depend_on_the_seed_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = circle_config(dir.path(), 0.5);
    cfg.disturbance.position_noise = 0.002;
    if let Scenario::Circle(s) = &mut cfg.scenario {
        s.horizon = 80.0;
        s.fit_window = 20.0;
    }
    let a = run_circle(&cfg).unwrap();
    let b = run_circle(&cfg).unwrap();
    assert_eq!(a, b);
    cfg.seed += 1;
    let c = run_circle(&cfg).unwrap();
    assert_ne!(a.circles[0].fitted_center, c.circles[0].fitted_center);
}

#[test]
fn noiseless_reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = circle_config(dir.path(), 0.2);
    if let Scenario::Circle(s) = &mut cfg.scenario {
        s.horizon = 90.0;
        s.fit_window = 20.0;
    }
    let a = run_circle(&cfg).unwrap();
    let first = std::fs::read(&a.circles[0].trajectory).unwrap();
    cfg.seed = 99;
    let b = run_circle(&cfg).unwrap();
    let second = std::fs::read(&b.circles[0].trajectory).unwrap();
    assert_eq!(first, second);
    assert_eq!(a.checks, b.checks);
}

#[test]
fn single_waypoint_straight_ahead() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::new(Scenario::default_for(ScenarioKind::Waypoints));
    cfg.out_dir = dir.path().to_path_buf();
    if let Scenario::Waypoints(s) = &mut cfg.scenario {
        s.start = [0.0, 0.0];
        s.start_heading = 0.0;
        s.waypoints = vec![Waypoint {
            x: 1.0,
            y: 0.0,
            speed: WaypointSpeed::Stop(StopKeyword::Stop),
        }];
    }
    let report = run_waypoints(&cfg).unwrap();
    assert!(report.passed, "{}", report.summary());
    assert_eq!(report.stops.len(), 1);
    assert!(report.stops[0].settled_at.is_some());
}

#[test]
fn waypoints_under_slope_for_two_seeds() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [1, 2] {
        let mut cfg = ScenarioConfig::new(Scenario::default_for(ScenarioKind::Waypoints));
        cfg.out_dir = dir.path().to_path_buf();
        cfg.seed = seed;
        cfg.disturbance = Disturbance {
            slope_force: Vec3::new(-0.02, 0.03, 0.0),
            position_noise: 0.002,
            heading_noise: 0.005,
        };
        let report = run_waypoints(&cfg).unwrap();
        assert!(report.passed, "seed {seed}\n{}", report.summary());
    }
}
