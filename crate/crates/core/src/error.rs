use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("contact inertia operator is singular (condition estimate {0:e})")]
    SingularInertia(f64),

    #[error("contact violated at t = {t:.4} s (N = [{nx:.4}, {ny:.4}, {nz:.4}] N)")]
    ContactViolation { t: f64, nx: f64, ny: f64, nz: f64 },

    #[error("simulation failed at t = {t:.4} s: {source}")]
    Simulation {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution landed on the wrong branch (theta0 = {theta0:.4} rad)")]
    WrongBranch { theta0: f64 },

    #[error("{} sweep point(s) failed: {}", .0.len(), summarize_failures(.0))]
    SweepFailures(Vec<(f64, Error)>),

    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("two eigenvalues have near-zero real part: {0} and {1}")]
    AmbiguousTrivialMode(String, String),

    #[error("pose is stale: {gap:.3} s since the previous pose (limit {limit:.3} s)")]
    StalePose { gap: f64, limit: f64 },

    #[error("crossing speed {speed} m/s is infeasible (table covers [{min}, {max}] m/s)")]
    InfeasibleSpeed { speed: f64, min: f64, max: f64 },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn summarize_failures(failures: &[(f64, Error)]) -> String {
    failures
        .iter()
        .map(|(w, e)| format!("omega0 = {w:.4}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}
