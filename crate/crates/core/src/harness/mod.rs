//! Multi-seed benchmark runner: configuration, trials, aggregation and
//! result files.

mod output;
mod report;
mod trial;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemsFile;
use crate::error::{Error, Result};
use crate::gp::HyperOptSettings;
use crate::metrics::MetricsConfig;
use crate::strategies::{StrategyKind, StrategyParams};
use crate::trajopt::OptimizerConfig;

pub use output::{
    emit_results, parse_curves_csv, parse_summary_csv, parse_trials_csv, replay, FailureNote, Manifest,
    ManifestExperiment, TrialRow, MANIFEST_FORMAT, SUMMARY_HEADER, TRIALS_HEADER,
};
pub use report::{aggregate, render_table, run_benchmark, BenchmarkReport, CellSummary, CurvePoint};
pub use trial::{run_trial, Checkpoint, StepRecord, TrialResult, TrialStatus};

/// GP refitting policy used by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSettings {
    /// Hyperparameters are optimized only once the dataset has this many
    /// points; smaller datasets use the data heuristic.
    pub min_fit_points: usize,
    /// Above this many points hyperparameters are optimized only on every
    /// `reopt_every`-th update event.
    pub reopt_cap_after: usize,
    pub reopt_every: usize,
    pub hyperopt: HyperOptSettings,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            min_fit_points: 10,
            reopt_cap_after: 200,
            reopt_every: 5,
            hyperopt: HyperOptSettings::default(),
        }
    }
}

/// Benchmark configuration file.
///
/// ```toml
/// systems = ["pendulum"]
/// strategies = ["prbs", "chirp", "greedy", "sep", "rec", "pa"]
/// trials = 10
/// base_seed = 0
///
/// [planner]
/// population_size = 64
///
/// [strategy.chirp]
/// f_high = 2.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub systems: Vec<String>,
    pub strategies: Vec<StrategyKind>,
    pub trials: usize,
    /// Trial `i` uses seed `base_seed ^ i`.
    pub base_seed: u64,
    /// Seed of the shared evaluation grid.
    pub grid_seed: u64,
    pub checkpoint_interval: usize,
    /// Overrides the per-system step budget.
    pub steps: Option<usize>,
    /// Overrides the per-system planning horizon.
    pub horizon: Option<usize>,
    /// A trial fails once more than this fraction of its steps came from
    /// planner fallbacks.
    pub max_fallback_fraction: f64,
    /// Alternative systems file, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub systems_file: Option<PathBuf>,
    pub gp: GpSettings,
    pub planner: OptimizerConfig,
    pub metrics: MetricsConfig,
    pub strategy: StrategyParams,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            systems: vec!["pendulum".into()],
            strategies: StrategyKind::ALL.to_vec(),
            trials: 10,
            base_seed: 0,
            grid_seed: 0x5eed,
            checkpoint_interval: 10,
            steps: None,
            horizon: None,
            max_fallback_fraction: 0.5,
            systems_file: None,
            gp: GpSettings::default(),
            planner: OptimizerConfig::default(),
            metrics: MetricsConfig::default(),
            strategy: StrategyParams::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// A configuration together with the system definitions it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub config: BenchmarkConfig,
    pub systems: SystemsFile,
}

impl BenchmarkPlan {
    pub fn new(config: BenchmarkConfig, systems: SystemsFile) -> Self {
        Self { config, systems }
    }

    /// Read a configuration file; a `systems_file` entry is resolved
    /// relative to it, otherwise the built-in systems are used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = BenchmarkConfig::parse(&text)?;
        let systems = match config.systems_file.take() {
            Some(rel) => SystemsFile::load(&path.parent().unwrap_or(Path::new(".")).join(rel))?,
            None => SystemsFile::default_file()?,
        };
        Ok(Self { config, systems })
    }

    /// One experiment per (system, strategy), systems in configuration
    /// order and strategies in table order.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        let c = &self.config;
        if c.systems.is_empty() || c.strategies.is_empty() {
            return Err(Error::Config("need at least one system and one strategy".into()));
        }
        if !(0.0..=1.0).contains(&c.max_fallback_fraction) {
            return Err(Error::Config("max_fallback_fraction must lie in [0, 1]".into()));
        }
        let mut out = Vec::new();
        for (i, name) in c.systems.iter().enumerate() {
            if c.systems[..i].contains(name) {
                return Err(Error::Config(format!("system `{name}` listed twice")));
            }
            let entry = self.systems.entry(name)?;
            for kind in StrategyKind::TABLE_ORDER {
                if !c.strategies.contains(&kind) {
                    continue;
                }
                let e = ExperimentConfig {
                    system: name.clone(),
                    strategy: kind,
                    trials: c.trials,
                    steps: c.steps.unwrap_or(entry.steps),
                    horizon: c.horizon.unwrap_or(entry.horizon),
                    base_seed: c.base_seed,
                    grid_seed: c.grid_seed,
                    checkpoint_interval: c.checkpoint_interval,
                    max_fallback_fraction: c.max_fallback_fraction,
                    gp: c.gp.clone(),
                    planner: c.planner.clone(),
                    metrics: c.metrics.clone(),
                    strategy_params: c.strategy.clone(),
                };
                e.validate()?;
                out.push(e);
            }
        }
        Ok(out)
    }
}

/// Fully resolved settings of one (system, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: String,
    pub strategy: StrategyKind,
    pub trials: usize,
    /// Environment step budget N.
    pub steps: usize,
    /// Planning horizon M.
    pub horizon: usize,
    pub base_seed: u64,
    pub grid_seed: u64,
    pub checkpoint_interval: usize,
    pub max_fallback_fraction: f64,
    pub gp: GpSettings,
    pub planner: OptimizerConfig,
    pub metrics: MetricsConfig,
    pub strategy_params: StrategyParams,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.steps < self.horizon {
            return Err(Error::Config(format!(
                "{}: need steps >= horizon >= 1, got steps {} and horizon {}",
                self.system, self.steps, self.horizon
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if self.checkpoint_interval == 0 {
            return Err(Error::Config("checkpoint_interval must be at least 1".into()));
        }
        if self.metrics.grid_size == 0 || self.metrics.cells_per_dim == Some(0) {
            return Err(Error::Config(
                "metrics need a non-empty grid and at least one cell".into(),
            ));
        }
        if self.gp.reopt_every == 0 {
            return Err(Error::Config("gp.reopt_every must be at least 1".into()));
        }
        self.planner.validate()?;
        self.strategy_params.validate()
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed ^ trial as u64
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.trials).map(|i| self.trial_seed(i)).collect()
    }

    /// Every `checkpoint_interval` steps, always ending at the budget.
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (1..)
            .map(|i| i * self.checkpoint_interval)
            .take_while(|&s| s < self.steps)
            .collect();
        v.push(self.steps);
        v
    }
}
