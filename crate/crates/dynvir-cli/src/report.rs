//! Report JSON and CSV tables.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Scenario, Suite};
use crate::CliError;

pub const SCHEMA_VERSION: &str = "1.0.0";

pub fn report_schema_version() -> &'static str {
    SCHEMA_VERSION
}

/// One verified quantity: passes when `value ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub anchor: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Acceptance criterion the check belongs to.
    #[serde(skip)]
    pub criterion: u8,
}

impl Check {
    pub fn new(criterion: u8, name: impl Into<String>, anchor: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), anchor: anchor.into(), value, tolerance, pass: value <= tolerance, criterion }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.value <= tolerance;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(self.file_name());
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub suite: Suite,
    pub scenario: Scenario,
    pub checks: Vec<Check>,
    pub tables: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn new(scenario: Scenario, checks: Vec<Check>, tables: &[Table]) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            suite: scenario.suite,
            scenario,
            checks,
            tables: tables.iter().map(Table::file_name).collect(),
            pass,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
