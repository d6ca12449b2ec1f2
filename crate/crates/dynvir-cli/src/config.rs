//! Scenario files: `{"scenario": {...}}` with every physical constant explicit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dynvir::kernel::Potential;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    KernelIdentities,
    BosonCommutators,
    SvAlgebra,
    EquilibriumLoop,
    DbmMoments,
    Girsanov,
    Npoint,
    NpBrackets,
    HermiteExample,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::KernelIdentities,
        Suite::BosonCommutators,
        Suite::SvAlgebra,
        Suite::EquilibriumLoop,
        Suite::DbmMoments,
        Suite::Girsanov,
        Suite::Npoint,
        Suite::NpBrackets,
        Suite::HermiteExample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::KernelIdentities => "kernel-identities",
            Suite::BosonCommutators => "boson-commutators",
            Suite::SvAlgebra => "sv-algebra",
            Suite::EquilibriumLoop => "equilibrium-loop",
            Suite::DbmMoments => "dbm-moments",
            Suite::Girsanov => "girsanov",
            Suite::Npoint => "npoint",
            Suite::NpBrackets => "np-brackets",
            Suite::HermiteExample => "hermite-example",
        }
    }
}

/// `V'(λ) = Σ_l b_l λ^l` and the inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub beta: f64,
    pub b: BTreeMap<usize, f64>,
}

impl PotentialConfig {
    pub fn hermite(sigma: f64, beta: f64) -> Self {
        Self { beta, b: BTreeMap::from([(1, 1.0 / (sigma * sigma))]) }
    }

    pub fn build(&self) -> Result<Potential, CliError> {
        Potential::new(self.beta, self.b.iter().map(|(&l, &c)| (l, c))).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebugFlags {
    /// Negative control: the kernel suite exponentiates `-A` instead of `A`.
    #[serde(default)]
    pub flip_generator_sign: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub suite: Suite,
    pub potential: PotentialConfig,
    /// Particle number.
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub k_max: usize,
    /// Replicas for trajectory suites, sweeps for the Metropolis suite.
    pub replicas: usize,
    pub seed: u64,
    /// Per-check tolerance overrides, keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub debug: DebugFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Scenario,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        file.scenario.validate()?;
        Ok(file.scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ConfigFile { scenario: self.clone() }).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return bad(format!("horizon {} must be at least dt", self.horizon));
        }
        if self.n == 0 || self.k_max == 0 || self.replicas == 0 {
            return bad("n, k_max and replicas must be positive".into());
        }
        if let Some((name, t)) = self.tolerances.iter().find(|(_, t)| !(**t >= 0.0)) {
            return bad(format!("tolerance {name} = {t} is not a non-negative number"));
        }
        self.potential.build()?;
        Ok(())
    }

    /// Number of `dt` steps covering the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// `σ` when `V' = λ/σ²`.
    pub fn hermite_sigma(&self) -> Option<f64> {
        match self.potential.b.iter().collect::<Vec<_>>()[..] {
            [(&1, &c)] if c > 0.0 => Some(1.0 / c.sqrt()),
            _ => None,
        }
    }

    pub fn require_hermite(&self) -> Result<f64, CliError> {
        self.hermite_sigma()
            .ok_or_else(|| CliError::Config(format!("suite {} needs b = {{1: 1/σ²}}", self.suite.name())))
    }

    /// Defaults reproducing the acceptance runs.
    pub fn default_for(suite: Suite) -> Self {
        let hermite = PotentialConfig::hermite(1.0, 2.0);
        let base = |potential, n, dt, horizon, k_max, replicas, seed| Scenario {
            suite,
            potential,
            n,
            dt,
            horizon,
            k_max,
            replicas,
            seed,
            tolerances: BTreeMap::new(),
            output: None,
            debug: DebugFlags::default(),
        };
        match suite {
            Suite::KernelIdentities => {
                base(PotentialConfig { beta: 2.0, b: BTreeMap::from([(2, 1.0)]) }, 1, 0.1, 0.3, 12, 1, 0)
            }
            Suite::BosonCommutators => base(PotentialConfig { beta: 2.0, b: BTreeMap::from([(1, 1.0), (2, 0.3)]) }, 3, 0.07, 0.35, 4, 1, 0),
            Suite::SvAlgebra => base(hermite, 3, 0.02, 1.0, 8, 1, 0),
            Suite::HermiteExample => base(hermite, 3, 0.005, 1.0, 6, 1, 0),
            Suite::EquilibriumLoop => base(hermite, 5, 1.0, 1.0, 1, 100_000, 41),
            Suite::DbmMoments => base(hermite, 5, 1e-3, 6.0, 1, 20_000, 1),
            Suite::Girsanov => base(hermite, 5, 5e-3, 1.0, 4, 20_000, 3),
            Suite::Npoint => base(hermite, 5, 1e-3, 1.0, 4, 20_000, 13),
            Suite::NpBrackets => base(PotentialConfig { beta: 2.0, b: BTreeMap::from([(1, 1.0), (3, 0.2)]) }, 4, 5e-4, 1.0, 1, 1, 0),
        }
    }
}
