use std::path::{Path, PathBuf};

use pkf_core::baselines::UtParams;
use pkf_core::bench::AlgorithmSpec;
use pkf_core::synth::{BirthDeathScenario, GenePanelScenario};
use pkf_core::ModelKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmName {
    Pkf,
    Kf,
    Ukf,
    Urts,
    Ipls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    BirthDeath,
    ConstReg,
}

impl From<ModelName> for ModelKind {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::BirthDeath => ModelKind::BirthDeath,
            ModelName::ConstReg => ModelKind::ConstantRegulation,
        }
    }
}

/// Everything a command needs. Loaded from a JSON file, then overridden by
/// whichever flags were given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: AlgorithmName,
    pub model: ModelName,
    pub iterations: usize,
    pub q: f64,
    pub ut: UtParams,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub jobs: usize,
    /// Replaces the scenario seeds when set.
    pub seed: Option<u64>,
    pub retain_history: bool,
    pub scenario: BirthDeathScenario,
    pub panel: GenePanelScenario,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: AlgorithmName::Pkf,
            model: ModelName::BirthDeath,
            iterations: 10,
            q: 10.0,
            ut: UtParams::default(),
            input: None,
            output: None,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            seed: None,
            retain_history: false,
            scenario: BirthDeathScenario::default(),
            panel: GenePanelScenario::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs < 1 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        if self.iterations < 1 {
            return Err(CliError::Config("iterations must be at least 1".into()));
        }
        if !self.q.is_finite() || self.q < 0.0 {
            return Err(CliError::Config(format!("q must be finite and >= 0, got {}", self.q)));
        }
        for (name, p) in [("input", &self.input), ("output", &self.output)] {
            if p.as_ref().is_some_and(|p| p.as_os_str().is_empty()) {
                return Err(CliError::Config(format!("{name} path is empty")));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> AlgorithmSpec {
        let (q, iterations) = (self.q, self.iterations);
        match self.algorithm {
            AlgorithmName::Pkf => AlgorithmSpec::Pkf { iterations },
            AlgorithmName::Kf => AlgorithmSpec::Kf { q },
            AlgorithmName::Ukf => AlgorithmSpec::Ukf { q },
            AlgorithmName::Urts => AlgorithmSpec::Urts { q },
            AlgorithmName::Ipls => AlgorithmSpec::Ipls { q, iterations },
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.into()
    }

    pub fn birth_death(&self) -> BirthDeathScenario {
        BirthDeathScenario {
            seed: self.seed.unwrap_or(self.scenario.seed),
            ..self.scenario.clone()
        }
    }

    pub fn gene_panel(&self) -> GenePanelScenario {
        GenePanelScenario {
            seed: self.seed.unwrap_or(self.panel.seed),
            ..self.panel.clone()
        }
    }
}
