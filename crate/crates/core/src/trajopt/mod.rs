//! Informative control trajectories through the learned dynamics.
//!
//! The planner maximizes the summed predictive entropy along the GP mean
//! rollout `x̂_{i+1} = μ(x̂_i, u_i)`, `x̂_0 = x_0`, over an `M`-step bounded
//! control sequence. Eliminating the rollout recursion leaves a box-
//! constrained problem in the controls alone, solved by [`search`]'s
//! population search plus coordinate refinement. A goal-reaching variant
//! steers the mean rollout towards a target state.

mod search;
mod sequence;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BoxBounds;
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::gp::{entropy_from_variances, GpModel};

pub use search::SearchTrace;
pub use sequence::{ControlBounds, ControlSequence};

/// Population-search settings shared by all planners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub population_size: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    /// Maximum coordinate-refinement passes over the incumbent.
    pub refinement_steps: usize,
    /// Refinement stops once a full pass gains less than this.
    pub convergence_tolerance: f64,
    /// Penalty on `Σ|u|²`, expressed for controls normalized by the bound
    /// span (see [`OptimizerConfig::penalty_weight`]).
    pub control_penalty_weight: f64,
    /// Floor on the sampling standard deviation, as a fraction of the span.
    pub min_std_fraction: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 2,
            population_size: 64,
            elite_fraction: 0.125,
            iterations: 15,
            refinement_steps: 20,
            convergence_tolerance: 1e-9,
            control_penalty_weight: 0.01,
            min_std_fraction: 0.02,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("optimizer: {msg}")));
        if self.restarts == 0 || self.population_size == 0 || self.iterations == 0 {
            return bad("restarts, population_size and iterations must be positive");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return bad("elite_fraction must lie in (0, 1)");
        }
        if self.elite_fraction * (self.population_size as f64) < 2.0 {
            return bad("elite_fraction · population_size must be at least 2");
        }
        if !(self.control_penalty_weight >= 0.0 && self.control_penalty_weight.is_finite()) {
            return bad("control_penalty_weight must be nonnegative");
        }
        if !(self.convergence_tolerance >= 0.0 && self.min_std_fraction >= 0.0) {
            return bad("tolerances must be nonnegative");
        }
        Ok(())
    }

    pub(crate) fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population_size as f64).ceil() as usize).clamp(1, self.population_size)
    }

    /// Weight applied to raw `Σ|u|²`: the configured weight divided by the
    /// mean squared span of the control bounds.
    pub fn penalty_weight(&self, bounds: &ControlBounds) -> f64 {
        let mean_span2 = (0..bounds.dim()).map(|j| bounds.span(j).powi(2)).sum::<f64>() / bounds.dim() as f64;
        self.control_penalty_weight / mean_span2
    }
}

/// A planned control sequence with its predicted mean states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrajectory {
    pub controls: ControlSequence,
    /// `(M + 1) × d_x`, row 0 is the starting state.
    pub predicted_states: DMatrix<f64>,
    /// Value of the maximized objective at `controls`. For goal plans this
    /// is the negated goal cost.
    pub objective_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: PlannedTrajectory,
    pub trace: SearchTrace,
}

#[derive(Default)]
struct Buffers {
    z: Vec<f64>,
    scratch: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl Buffers {
    fn new(model: &GpModel) -> Self {
        Self {
            z: vec![0.0; model.input_dim()],
            scratch: Vec::with_capacity(model.len()),
            mean: vec![0.0; model.output_dim()],
            var: vec![0.0; model.output_dim()],
        }
    }
}

fn check_planning_inputs(model: &GpModel, x0: &[f64], control_dim: usize) -> Result<()> {
    ensure_len("planning state", model.output_dim(), x0.len())?;
    ensure_len(
        "model input (state + control)",
        model.input_dim(),
        x0.len() + control_dim,
    )?;
    ensure_finite("planning state", x0)
}

/// Summed entropy along the mean rollout minus `weight · Σ|u|²`; NaN when
/// the rollout leaves the finite numbers.
fn entropy_value(
    model: &GpModel,
    x0: &[f64],
    controls: &[f64],
    control_dim: usize,
    weight: f64,
    buf: &mut Buffers,
) -> f64 {
    let dx = x0.len();
    buf.z[..dx].copy_from_slice(x0);
    let mut total = 0.0;
    for u in controls.chunks_exact(control_dim) {
        buf.z[dx..].copy_from_slice(u);
        model.predict_into(&buf.z, &mut buf.scratch, &mut buf.mean, &mut buf.var);
        if !buf.mean.iter().all(|m| m.is_finite()) {
            return f64::NAN;
        }
        total += entropy_from_variances(&buf.var);
        buf.z[..dx].copy_from_slice(&buf.mean);
    }
    let penalty: f64 = controls.iter().map(|u| u * u).sum();
    total - weight * penalty
}

/// Terminal goal cost `Σ_j w_j (x̂_M,j − g_j)² + weight · Σ|u|²`.
#[allow(clippy::too_many_arguments)]
fn goal_value(
    model: &GpModel,
    x0: &[f64],
    goal: &[f64],
    state_weights: &[f64],
    controls: &[f64],
    control_dim: usize,
    weight: f64,
    buf: &mut Buffers,
) -> f64 {
    let dx = x0.len();
    buf.z[..dx].copy_from_slice(x0);
    for u in controls.chunks_exact(control_dim) {
        buf.z[dx..].copy_from_slice(u);
        model.predict_mean_into(&buf.z, &mut buf.mean);
        buf.z[..dx].copy_from_slice(&buf.mean);
    }
    let terminal: f64 = buf.z[..dx]
        .iter()
        .zip(goal)
        .zip(state_weights)
        .map(|((x, g), w)| w * (x - g).powi(2))
        .sum();
    let penalty: f64 = controls.iter().map(|u| u * u).sum();
    let cost = terminal + weight * penalty;
    if cost.is_finite() {
        cost
    } else {
        f64::NAN
    }
}

/// GP mean rollout from `x0` under `controls`.
pub fn mean_rollout(model: &GpModel, x0: &[f64], controls: &ControlSequence) -> Result<DMatrix<f64>> {
    check_planning_inputs(model, x0, controls.control_dim())?;
    let dx = x0.len();
    let mut states = DMatrix::zeros(controls.len() + 1, dx);
    states.row_mut(0).copy_from_slice(x0);
    let mut buf = Buffers::new(model);
    buf.z[..dx].copy_from_slice(x0);
    for (i, u) in controls.iter().enumerate() {
        buf.z[dx..].copy_from_slice(u);
        model.predict_mean_into(&buf.z, &mut buf.mean);
        if !buf.mean.iter().all(|m| m.is_finite()) {
            return Err(Error::Planning(format!("mean rollout became non-finite at step {i}")));
        }
        for (j, m) in buf.mean.iter().enumerate() {
            states[(i + 1, j)] = *m;
        }
        buf.z[..dx].copy_from_slice(&buf.mean);
    }
    Ok(states)
}

/// `Σ_{i<M} H(x̂_i, u_i) − penalty_weight · Σ_i |u_i|²` along the mean
/// rollout. The weight is applied to raw controls.
pub fn entropy_objective(model: &GpModel, x0: &[f64], controls: &ControlSequence, penalty_weight: f64) -> Result<f64> {
    check_planning_inputs(model, x0, controls.control_dim())?;
    let mut buf = Buffers::new(model);
    let v = entropy_value(
        model,
        x0,
        controls.as_flat(),
        controls.control_dim(),
        penalty_weight,
        &mut buf,
    );
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Planning("entropy objective is not finite".into()))
    }
}

/// Per-dimension weights `1 / span²` of the region of interest.
pub fn goal_weights(region: &BoxBounds) -> Vec<f64> {
    (0..region.dim()).map(|j| 1.0 / region.span(j).powi(2)).collect()
}

/// Normalized terminal distance plus control penalty for a goal plan.
pub fn goal_cost(
    model: &GpModel,
    x0: &[f64],
    goal: &[f64],
    region: &BoxBounds,
    controls: &ControlSequence,
    penalty_weight: f64,
) -> Result<f64> {
    check_planning_inputs(model, x0, controls.control_dim())?;
    ensure_len("goal state", x0.len(), goal.len())?;
    ensure_len("region of interest", x0.len(), region.dim())?;
    let mut buf = Buffers::new(model);
    let w = goal_weights(region);
    let v = goal_value(
        model,
        x0,
        goal,
        &w,
        controls.as_flat(),
        controls.control_dim(),
        penalty_weight,
        &mut buf,
    );
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Planning("goal cost is not finite".into()))
    }
}

/// Most informative `horizon`-step control sequence from `x0`.
///
/// The zero sequence and, when given, `warm_start` (resized to the horizon)
/// are injected into the initial population. Deterministic for a given
/// generator state.
pub fn optimize_entropy<R: Rng + ?Sized>(
    model: &GpModel,
    x0: &[f64],
    horizon: usize,
    bounds: &ControlBounds,
    config: &OptimizerConfig,
    rng: &mut R,
    warm_start: Option<&ControlSequence>,
) -> Result<PlanOutcome> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("planning horizon must be at least 1".into()));
    }
    config.validate()?;
    check_planning_inputs(model, x0, bounds.dim())?;
    let du = bounds.dim();
    let weight = config.penalty_weight(bounds);
    let mut seeds = vec![bounds.clamped_zero().repeat(horizon)];
    if let Some(w) = warm_start {
        ensure_len("warm start control dimension", du, w.control_dim())?;
        if !w.is_empty() {
            seeds.push(w.resized(horizon).as_flat().to_vec());
        }
    }
    let mut buf = Buffers::new(model);
    let result = search::maximize(&bounds.repeat(horizon), &seeds, config, rng, |u| {
        entropy_value(model, x0, u, du, weight, &mut buf)
    })
    .ok_or_else(|| Error::Planning("every entropy candidate was non-finite".into()))?;
    let controls = ControlSequence::from_flat(result.best, bounds)?;
    let objective_value = entropy_value(model, x0, controls.as_flat(), du, weight, &mut buf);
    let predicted_states = mean_rollout(model, x0, &controls)?;
    Ok(PlanOutcome {
        plan: PlannedTrajectory {
            controls,
            predicted_states,
            objective_value,
        },
        trace: result.trace,
    })
}

/// Controls steering the mean rollout from `x0` to `goal` in `horizon`
/// steps. Distances are normalized per dimension by the region spans.
#[allow(clippy::too_many_arguments)]
pub fn optimize_goal<R: Rng + ?Sized>(
    model: &GpModel,
    x0: &[f64],
    goal: &[f64],
    horizon: usize,
    bounds: &ControlBounds,
    region: &BoxBounds,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<PlanOutcome> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("planning horizon must be at least 1".into()));
    }
    config.validate()?;
    check_planning_inputs(model, x0, bounds.dim())?;
    ensure_len("goal state", x0.len(), goal.len())?;
    ensure_finite("goal state", goal)?;
    ensure_len("region of interest", x0.len(), region.dim())?;
    let du = bounds.dim();
    let weight = config.penalty_weight(bounds);
    let w = goal_weights(region);
    let seeds = vec![bounds.clamped_zero().repeat(horizon)];
    let mut buf = Buffers::new(model);
    let result = search::maximize(&bounds.repeat(horizon), &seeds, config, rng, |u| {
        -goal_value(model, x0, goal, &w, u, du, weight, &mut buf)
    })
    .ok_or_else(|| Error::Planning("every goal candidate was non-finite".into()))?;
    let controls = ControlSequence::from_flat(result.best, bounds)?;
    let objective_value = -goal_value(model, x0, goal, &w, controls.as_flat(), du, weight, &mut buf);
    let predicted_states = mean_rollout(model, x0, &controls)?;
    Ok(PlanOutcome {
        plan: PlannedTrajectory {
            controls,
            predicted_states,
            objective_value,
        },
        trace: result.trace,
    })
}

/// Best-entropy point in `search_box` (for instance region × control
/// bounds), by the same population search.
pub fn maximize_entropy_point<R: Rng + ?Sized>(
    model: &GpModel,
    search_box: &BoxBounds,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, f64, SearchTrace)> {
    config.validate()?;
    ensure_len("entropy search box", model.input_dim(), search_box.dim())?;
    let mut buf = Buffers::new(model);
    let result = search::maximize(search_box, &[], config, rng, |z| {
        model.predict_into(z, &mut buf.scratch, &mut buf.mean, &mut buf.var);
        entropy_from_variances(&buf.var)
    })
    .ok_or_else(|| Error::Planning("every entropy-search candidate was non-finite".into()))?;
    Ok((result.best, result.value, result.trace))
}

#[cfg(test)]
mod tests;
