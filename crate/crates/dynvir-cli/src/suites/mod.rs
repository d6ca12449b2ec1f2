//! One function per suite, each returning its checks and CSV tables.

mod analytic;
mod brackets;
mod stochastic;

use dynvir::dyson::Estimate;

use crate::config::{Scenario, Suite};
use crate::report::{Check, Table};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct SuiteOutput {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

/// Collects checks, applying the scenario's tolerance overrides.
pub(crate) struct Checks<'a> {
    scenario: &'a Scenario,
    out: SuiteOutput,
}

impl<'a> Checks<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        Self { scenario, out: SuiteOutput::default() }
    }

    fn push(&mut self, criterion: u8, name: impl Into<String>, anchor: &str, value: f64, tolerance: f64) {
        let name = name.into();
        let tolerance = self.scenario.tolerances.get(&name).copied().unwrap_or(tolerance);
        // NaN never passes.
        let value = if value.is_nan() { f64::INFINITY } else { value };
        self.out.checks.push(Check::new(criterion, name, anchor, value, tolerance));
    }

    /// `|z|` of an estimate against a target.
    fn z(&mut self, criterion: u8, name: impl Into<String>, anchor: &str, est: Estimate, target: f64, n_se: f64) {
        self.push(criterion, name, anchor, est.z_score(target).abs(), n_se);
    }

    fn table(&mut self, t: Table) {
        self.out.tables.push(t);
    }

    fn finish(self) -> SuiteOutput {
        self.out
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:e}")
}

pub fn run_suite(scenario: &Scenario) -> Result<SuiteOutput, CliError> {
    scenario.validate()?;
    let mut c = Checks::new(scenario);
    match scenario.suite {
        Suite::KernelIdentities => analytic::kernel_identities(scenario, &mut c)?,
        Suite::BosonCommutators => analytic::boson_commutators(scenario, &mut c)?,
        Suite::SvAlgebra => analytic::sv_algebra(scenario, &mut c)?,
        Suite::HermiteExample => analytic::hermite_example(scenario, &mut c)?,
        Suite::EquilibriumLoop => stochastic::equilibrium_loop(scenario, &mut c)?,
        Suite::DbmMoments => stochastic::dbm_moments(scenario, &mut c)?,
        Suite::Girsanov => stochastic::girsanov(scenario, &mut c)?,
        Suite::Npoint => stochastic::npoint(scenario, &mut c)?,
        Suite::NpBrackets => brackets::np_brackets(scenario, &mut c)?,
    }
    Ok(c.finish())
}
