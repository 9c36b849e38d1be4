//! Config-driven runs of the pws scenarios with CSV and SVG output.

pub mod check;
pub mod config;
pub mod report;
pub mod run;
pub mod svg;

pub use config::{load_config, parse_config, ConfigError, RunConfig, ScenarioKind};
pub use run::{execute, write_artifacts, Artifacts, Overrides};

/// Thread count for `check`, from `PWS_THREADS`; defaults to the available parallelism.
pub const THREADS_ENV: &str = "PWS_THREADS";

pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
