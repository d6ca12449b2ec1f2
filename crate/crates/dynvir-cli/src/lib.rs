//! Scenario runner for the `dynvir` checks: config parsing, suites and reports.

pub mod config;
pub mod report;
pub mod suites;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{Scenario, Suite};
pub use report::{report_schema_version, Check, Report, Table, SCHEMA_VERSION};
pub use suites::{run_suite, SuiteOutput};

/// Overrides the scenario's output directory when `--out` is absent.
pub const OUT_ENV: &str = "DYNVIR_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Kernel(#[from] dynvir::kernel::KernelError),
    #[error(transparent)]
    Boson(#[from] dynvir::boson::BosonError),
    #[error(transparent)]
    Sv(#[from] dynvir::svconstraints::SvError),
    #[error(transparent)]
    Dyson(#[from] dynvir::dyson::DysonError),
    #[error(transparent)]
    Np(#[from] dynvir::nptransform::NpError),
}

impl CliError {
    /// Process exit code: config and runtime errors are both 2.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// `--out`, then the environment, then the config, then the working directory.
pub fn resolve_out_dir(cli: Option<&Path>, scenario: &Scenario) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| scenario.output.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs the suite and writes `report.json` plus its tables into `out`.
pub fn run_to_dir(scenario: &Scenario, out: &Path) -> Result<Report, CliError> {
    let output = run_suite(scenario)?;
    std::fs::create_dir_all(out)?;
    for t in &output.tables {
        t.write(out)?;
    }
    let report = Report::new(scenario.clone(), output.checks, &output.tables);
    std::fs::write(out.join("report.json"), report.to_json())?;
    Ok(report)
}
