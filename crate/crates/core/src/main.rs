use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rollsim::harness::{self, report, RunReport, Scenario, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "rollsim",
    version,
    about = "Simulate and control a pendulum-driven rolling sphere"
)]
struct Cli {
    /// Scenario config (JSON); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV and JSON outputs, overriding the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Noise seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Abort a run when contact is lost or the friction cone is left.
    #[arg(long, global = true)]
    strict_contact: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state revolution table.
    Quasistatic {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Linear stability of the steady states.
    Stability {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Time-domain scenarios.
    Sim {
        #[command(subcommand)]
        scenario: SimScenario,
    },
    /// Report utilities.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
    /// Print a default config for a scenario.
    Init {
        #[arg(value_parser = ["open-loop", "circle", "waypoints"])]
        scenario: String,
    },
}

#[derive(Subcommand)]
enum SweepAction {
    Sweep,
}

#[derive(Subcommand, Clone, Copy)]
enum SimScenario {
    OpenLoop,
    Circle,
    Waypoints,
}

impl SimScenario {
    fn kind(self) -> ScenarioKind {
        match self {
            Self::OpenLoop => ScenarioKind::OpenLoopSweep,
            Self::Circle => ScenarioKind::Circle,
            Self::Waypoints => ScenarioKind::Waypoints,
        }
    }
}

#[derive(Subcommand)]
enum ReportAction {
    /// Compare check values of two report.json files.
    Compare {
        reference: PathBuf,
        candidate: PathBuf,
        /// Allowed relative difference per check.
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
    },
}

fn load(cli: &Cli, kind: ScenarioKind) -> rollsim::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let (cfg, warnings) = ScenarioConfig::load(path)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            cfg
        }
        None => ScenarioConfig::new(Scenario::default_for(kind)),
    };
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.integrator.strict_contact |= cli.strict_contact;
    Ok(cfg)
}

fn finish(cfg: &ScenarioConfig, report: rollsim::Result<RunReport>) -> rollsim::Result<bool> {
    let report = report?;
    let path = harness::write_report(cfg, &report)?;
    print!("{}", report.summary());
    println!("report: {}", path.display());
    Ok(report.passed)
}

fn run(cli: &Cli) -> rollsim::Result<bool> {
    match &cli.command {
        Command::Quasistatic {
            action: SweepAction::Sweep,
        } => {
            let cfg = load(cli, ScenarioKind::OpenLoopSweep)?;
            finish(&cfg, harness::run_quasistatic_sweep(&cfg))
        }
        Command::Stability {
            action: SweepAction::Sweep,
        } => {
            let cfg = load(cli, ScenarioKind::OpenLoopSweep)?;
            finish(&cfg, harness::run_stability_sweep(&cfg))
        }
        Command::Sim { scenario } => {
            let cfg = load(cli, scenario.kind())?;
            if cfg.scenario.kind() != scenario.kind() {
                return Err(rollsim::Error::SchemaMismatch(format!(
                    "config describes a {} scenario, not {}",
                    cfg.scenario.kind().name(),
                    scenario.kind().name()
                )));
            }
            finish(&cfg, harness::run_scenario(&cfg))
        }
        Command::Report {
            action:
                ReportAction::Compare {
                    reference,
                    candidate,
                    tolerance,
                },
        } => {
            let a = RunReport::read_json(reference)?;
            let b = RunReport::read_json(candidate)?;
            let diffs = report::compare(&a, &b, *tolerance);
            let show = |v: Option<f64>| v.map_or("missing".to_string(), |x| format!("{x:.9}"));
            for d in &diffs {
                println!("{}: {} -> {}", d.name, show(d.reference), show(d.candidate));
            }
            println!("{} difference(s)", diffs.len());
            Ok(diffs.is_empty())
        }
        Command::Init { scenario } => {
            let kind = match scenario.as_str() {
                "open-loop" => ScenarioKind::OpenLoopSweep,
                "circle" => ScenarioKind::Circle,
                _ => ScenarioKind::Waypoints,
            };
            print!(
                "{}",
                ScenarioConfig::new(Scenario::default_for(kind)).to_json()?
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
