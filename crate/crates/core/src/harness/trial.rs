use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, GpSettings};
use crate::dynamics::DynamicalSystem;
use crate::error::{Error, Result};
use crate::gp::{heuristic_init, optimize_hyperparameters, Dataset, GpModel, Hyperparameters};
use crate::metrics::{coverage, default_cells_per_dim, rmse, EvaluationGrid};
use crate::strategies::{Explorer, PlannerStatus, StrategyContext, UpdateCadence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub control: Vec<f64>,
    pub status: PlannerStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed { step: usize, reason: String },
}

impl TrialStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, TrialStatus::Ok)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub system: String,
    pub strategy: crate::strategies::StrategyKind,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// Percentage of the region of interest visited by the true states.
    pub coverage_final: f64,
    pub wall_seconds: f64,
    pub status: TrialStatus,
    pub steps: Vec<StepRecord>,
    /// Observations in the final GP dataset.
    pub observations: usize,
    pub fallbacks: usize,
    /// Hyperparameter optimizations run, and how many of them ended below
    /// their starting likelihood (always zero for a correct optimizer).
    pub hyperparameter_updates: usize,
    pub likelihood_decreases: usize,
}

impl TrialResult {
    pub fn final_rmse(&self) -> Option<f64> {
        if self.status.is_ok() {
            self.checkpoints.last().map(|c| c.rmse)
        } else {
            None
        }
    }

    pub fn controls_applied(&self) -> usize {
        self.steps.len()
    }
}

/// Folds new observations into the model and refits hyperparameters.
struct Updater<'a> {
    settings: &'a GpSettings,
    noise: f64,
    seed: u64,
    events: usize,
    optimized: bool,
    optimizations: usize,
    decreases: usize,
}

impl Updater<'_> {
    fn heuristic(&self, data: &Dataset) -> Vec<Hyperparameters> {
        (0..data.output_dim())
            .map(|d| heuristic_init(data, d, self.noise))
            .collect()
    }

    fn update(&mut self, model: &GpModel, pending: &mut Dataset) -> Result<GpModel> {
        self.events += 1;
        let new = std::mem::replace(pending, Dataset::new(pending.input_dim(), pending.output_dim()));
        let n = model.len() + new.len();
        if n < self.settings.min_fit_points {
            let mut data = model.dataset().clone();
            data.extend(&new)?;
            let h = self.heuristic(&data);
            return GpModel::fit(data, h);
        }
        if n > self.settings.reopt_cap_after && !self.events.is_multiple_of(self.settings.reopt_every) {
            return model.add_observations(&new);
        }
        let mut data = model.dataset().clone();
        data.extend(&new)?;
        let start = if self.optimized {
            model.hyperparameters()
        } else {
            self.heuristic(&data)
        };
        let mut hypers = Vec::with_capacity(start.len());
        for (d, init) in start.iter().enumerate() {
            let mut hs = self.settings.hyperopt.clone();
            hs.seed = hs.seed ^ self.seed.rotate_left(17) ^ (self.events as u64) << 8 ^ d as u64;
            let out = optimize_hyperparameters(&data, d, init, &hs)?;
            self.optimizations += 1;
            if out.log_likelihood < out.initial_log_likelihood {
                self.decreases += 1;
            }
            hypers.push(out.hyperparameters);
        }
        self.optimized = true;
        GpModel::fit(data, hypers)
    }
}

/// Runs one exploration trial of `config.steps` environment steps from the
/// system's initial state. Failures are reported in the result, not as
/// errors.
pub fn run_trial(config: &ExperimentConfig, system: &DynamicalSystem, grid: &EvaluationGrid, seed: u64) -> TrialResult {
    let started = Instant::now();
    let mut result = TrialResult {
        system: config.system.clone(),
        strategy: config.strategy,
        seed,
        checkpoints: Vec::new(),
        coverage_final: 0.0,
        wall_seconds: 0.0,
        status: TrialStatus::Ok,
        steps: Vec::with_capacity(config.steps),
        observations: 0,
        fallbacks: 0,
        hyperparameter_updates: 0,
        likelihood_decreases: 0,
    };
    let mut states = vec![system.spec().initial_state.clone()];
    let outcome = simulate(config, system, grid, seed, &mut result, &mut states);
    let spec = system.spec();
    let cells = config
        .metrics
        .cells_per_dim
        .unwrap_or_else(|| default_cells_per_dim(spec.state_dim));
    match outcome.and_then(|()| coverage(&states, &spec.region_of_interest, cells)) {
        Ok(c) => result.coverage_final = c,
        Err(e) => {
            log::warn!(
                "{} / {} seed {seed} failed at step {}: {e}",
                config.system,
                config.strategy,
                result.steps.len()
            );
            result.status = TrialStatus::Failed {
                step: result.steps.len(),
                reason: e.to_string(),
            };
            result.coverage_final = coverage(&states, &spec.region_of_interest, cells).unwrap_or(0.0);
        }
    }
    result.wall_seconds = started.elapsed().as_secs_f64();
    result
}

fn simulate(
    config: &ExperimentConfig,
    system: &DynamicalSystem,
    grid: &EvaluationGrid,
    seed: u64,
    result: &mut TrialResult,
    states: &mut Vec<Vec<f64>>,
) -> Result<()> {
    let spec = system.spec();
    let (dx, du) = (spec.state_dim, spec.control_dim);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let mut plan_rng = ChaCha8Rng::seed_from_u64(seed);
    plan_rng.set_stream(2);

    let mut updater = Updater {
        settings: &config.gp,
        noise: spec.noise_variance,
        seed,
        events: 0,
        optimized: false,
        optimizations: 0,
        decreases: 0,
    };
    let empty = Dataset::new(dx + du, dx);
    let prior = GpModel::prior(dx + du, updater.heuristic(&empty))?;
    let context = StrategyContext {
        bounds: spec.control_bounds.clone(),
        region: spec.region_of_interest.clone(),
        horizon: config.horizon,
        dt: spec.dt,
        total_steps: config.steps,
    };
    let mut explorer = Explorer::new(
        config.strategy,
        context,
        config.strategy_params.clone(),
        config.planner.clone(),
        prior,
    )?;
    let cadence = config.strategy.cadence();
    let checkpoints = config.checkpoints();
    let mut next_checkpoint = 0;
    let max_fallbacks = (config.max_fallback_fraction * config.steps as f64).floor() as usize;
    let mut pending = empty.clone();
    let mut x = spec.initial_state.clone();

    for k in 0..config.steps {
        let (u, status) = explorer.next_control(&x, &mut plan_rng);
        if status.is_fallback() {
            result.fallbacks += 1;
            if result.fallbacks > max_fallbacks {
                return Err(Error::Planning(format!("{} planner fallbacks", result.fallbacks)));
            }
        }
        let next = system.true_step(&x, &u).map_err(|e| e.at_step(k))?;
        let y = system.observe(&next, &mut noise_rng);
        let mut z = x.clone();
        z.extend_from_slice(&u);
        pending.push(&z, &y)?;
        result.steps.push(StepRecord {
            step: k,
            control: u,
            status,
        });
        states.push(next.clone());
        x = next;

        let step = k + 1;
        let at_checkpoint = checkpoints.get(next_checkpoint) == Some(&step);
        let update = match cadence {
            UpdateCadence::PerStep => true,
            UpdateCadence::PerRound => explorer.round_complete() || step == config.steps,
            UpdateCadence::CheckpointOnly => at_checkpoint,
        };
        if update && !pending.is_empty() {
            let m = updater.update(explorer.model(), &mut pending)?;
            explorer.set_model(m);
        }
        if at_checkpoint {
            let e = if pending.is_empty() {
                rmse(explorer.model(), grid)?
            } else {
                rmse(&explorer.model().add_observations(&pending)?, grid)?
            };
            result.checkpoints.push(Checkpoint { step, rmse: e });
            next_checkpoint += 1;
        }
    }
    result.observations = explorer.model().len();
    result.hyperparameter_updates = updater.optimizations;
    result.likelihood_decreases = updater.decreases;
    Ok(())
}
