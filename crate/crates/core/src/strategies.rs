//! Excitation strategies: open-loop PRBS and chirp signals, and the
//! model-based greedy, sep, rec and p&a planners.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BoxBounds;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::trajopt::{
    maximize_entropy_point, optimize_entropy, optimize_goal, ControlBounds, ControlSequence, OptimizerConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Prbs,
    Chirp,
    Greedy,
    Sep,
    Rec,
    Pa,
}

/// When the harness refits the GP for a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateCadence {
    PerStep,
    PerRound,
    CheckpointOnly,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Prbs,
        StrategyKind::Chirp,
        StrategyKind::Greedy,
        StrategyKind::Sep,
        StrategyKind::Rec,
        StrategyKind::Pa,
    ];

    /// Column order of the results table.
    pub const TABLE_ORDER: [StrategyKind; 6] = [
        StrategyKind::Prbs,
        StrategyKind::Chirp,
        StrategyKind::Sep,
        StrategyKind::Rec,
        StrategyKind::Pa,
        StrategyKind::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Prbs => "prbs",
            StrategyKind::Chirp => "chirp",
            StrategyKind::Greedy => "greedy",
            StrategyKind::Sep => "sep",
            StrategyKind::Rec => "rec",
            StrategyKind::Pa => "pa",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            StrategyKind::Prbs => "pseudorandom binary sequence with random hold times",
            StrategyKind::Chirp => "swept-frequency sine between the control bounds",
            StrategyKind::Greedy => "one-step entropy maximization",
            StrategyKind::Sep => "pick the most uncertain state-action, then steer there",
            StrategyKind::Rec => "receding-horizon entropy planning, first control applied",
            StrategyKind::Pa => "plan an entropy-maximizing sequence and apply all of it",
        }
    }

    pub fn is_model_based(self) -> bool {
        !matches!(self, StrategyKind::Prbs | StrategyKind::Chirp)
    }

    pub fn cadence(self) -> UpdateCadence {
        match self {
            StrategyKind::Greedy | StrategyKind::Rec => UpdateCadence::PerStep,
            StrategyKind::Sep | StrategyKind::Pa => UpdateCadence::PerRound,
            StrategyKind::Prbs | StrategyKind::Chirp => UpdateCadence::CheckpointOnly,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown strategy `{s}`; known strategies: prbs, chirp, greedy, sep, rec, pa"
            ))
        })
    }
}

/// Where each applied control came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerStatus {
    OpenLoop,
    ColdStart,
    Planned,
    /// Later control of an already planned batch.
    Queued,
    FallbackRandom,
    FallbackGreedy,
    FallbackEntropyPlan,
}

impl PlannerStatus {
    pub fn is_fallback(self) -> bool {
        matches!(
            self,
            PlannerStatus::FallbackRandom | PlannerStatus::FallbackGreedy | PlannerStatus::FallbackEntropyPlan
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrbsParams {
    /// Longest hold in steps; `None` uses the planning horizon.
    pub max_hold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChirpParams {
    pub f_low: f64,
    pub f_high: f64,
}

impl Default for ChirpParams {
    fn default() -> Self {
        Self {
            f_low: 0.1,
            f_high: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    /// Random controls applied before the first model-based decision.
    pub cold_start_steps: usize,
    pub prbs: PrbsParams,
    pub chirp: ChirpParams,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            cold_start_steps: 5,
            prbs: PrbsParams::default(),
            chirp: ChirpParams::default(),
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        if self.prbs.max_hold == Some(0) {
            return Err(Error::Config("prbs.max_hold must be at least 1".into()));
        }
        let c = &self.chirp;
        if !(c.f_low.is_finite() && c.f_high.is_finite() && c.f_low >= 0.0 && c.f_high >= c.f_low) {
            return Err(Error::Config("chirp needs 0 <= f_low <= f_high".into()));
        }
        Ok(())
    }
}

/// Per-dimension level and remaining hold of a PRBS signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrbsState {
    high: Vec<bool>,
    remaining: Vec<usize>,
}

/// Next PRBS control. Each dimension sits at its lower or upper bound and
/// toggles after a hold drawn uniformly from `1..=max_hold`.
pub fn prbs_next<R: Rng + ?Sized>(
    state: &mut PrbsState,
    bounds: &ControlBounds,
    max_hold: usize,
    rng: &mut R,
) -> Vec<f64> {
    let max_hold = max_hold.max(1);
    let du = bounds.dim();
    if state.high.len() != du {
        state.high = (0..du).map(|_| rng.random_bool(0.5)).collect();
        state.remaining = vec![0; du];
        for r in &mut state.remaining {
            *r = rng.random_range(1..=max_hold);
        }
    } else {
        for j in 0..du {
            if state.remaining[j] == 0 {
                state.high[j] = !state.high[j];
                state.remaining[j] = rng.random_range(1..=max_hold);
            }
        }
    }
    (0..du)
        .map(|j| {
            state.remaining[j] -= 1;
            if state.high[j] {
                bounds.upper()[j]
            } else {
                bounds.lower()[j]
            }
        })
        .collect()
}

/// Chirp control at step `k` of a `total_steps` experiment with sample time
/// `dt`. Frequency sweeps linearly from `f_low` to `f_high` Hz; odd control
/// dimensions use the opposite sign.
pub fn chirp_next(k: usize, bounds: &ControlBounds, dt: f64, total_steps: usize, params: &ChirpParams) -> Vec<f64> {
    let t = k as f64 * dt;
    let duration = (total_steps.max(1) as f64 * dt).max(f64::MIN_POSITIVE);
    let phase = 2.0 * PI * (params.f_low * t + (params.f_high - params.f_low) * t * t / (2.0 * duration));
    let s = phase.sin();
    let mut u: Vec<f64> = (0..bounds.dim())
        .map(|j| {
            let center = 0.5 * (bounds.lower()[j] + bounds.upper()[j]);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            center + sign * 0.5 * bounds.span(j) * s
        })
        .collect();
    bounds.clamp_in_place(&mut u);
    u
}

/// Control of the best one-step entropy plan; a random admissible control
/// if planning fails.
pub fn greedy_next<R: Rng + ?Sized>(
    model: &GpModel,
    x: &[f64],
    bounds: &ControlBounds,
    config: &OptimizerConfig,
    rng: &mut R,
) -> (Vec<f64>, PlannerStatus) {
    match optimize_entropy(model, x, 1, bounds, config, rng, None) {
        Ok(out) => (out.plan.controls.row(0).to_vec(), PlannerStatus::Planned),
        Err(e) => {
            log::warn!("greedy planning failed: {e}");
            (bounds.sample(rng), PlannerStatus::FallbackRandom)
        }
    }
}

/// First control of an `horizon`-step entropy plan, plus the plan itself
/// for warm-starting the next step.
pub fn rec_step<R: Rng + ?Sized>(
    model: &GpModel,
    x: &[f64],
    horizon: usize,
    bounds: &ControlBounds,
    config: &OptimizerConfig,
    rng: &mut R,
    warm_start: Option<&ControlSequence>,
) -> (Vec<f64>, Option<ControlSequence>, PlannerStatus) {
    match optimize_entropy(model, x, horizon, bounds, config, rng, warm_start) {
        Ok(out) => (
            out.plan.controls.row(0).to_vec(),
            Some(out.plan.controls),
            PlannerStatus::Planned,
        ),
        Err(e) => {
            log::warn!("receding-horizon planning failed: {e}");
            (bounds.sample(rng), None, PlannerStatus::FallbackRandom)
        }
    }
}

/// The whole `horizon`-step entropy plan; random controls if planning fails.
pub fn pa_step<R: Rng + ?Sized>(
    model: &GpModel,
    x: &[f64],
    horizon: usize,
    bounds: &ControlBounds,
    config: &OptimizerConfig,
    rng: &mut R,
) -> (Vec<Vec<f64>>, PlannerStatus) {
    match optimize_entropy(model, x, horizon, bounds, config, rng, None) {
        Ok(out) => (out.plan.controls.rows(), PlannerStatus::Planned),
        Err(e) => {
            log::warn!("plan-and-apply planning failed: {e}");
            (
                (0..horizon).map(|_| bounds.sample(rng)).collect(),
                PlannerStatus::FallbackRandom,
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SepRound {
    /// `horizon` steering controls followed by the target control.
    pub controls: Vec<Vec<f64>>,
    /// Selected state-action target, if the search succeeded.
    pub target: Option<Vec<f64>>,
    pub target_entropy: Option<f64>,
    pub status: PlannerStatus,
}

/// One round of separated search and control: find the most uncertain
/// state-action pair in region × bounds, steer towards its state for
/// `horizon` steps, then apply its control. Unreachable targets are not
/// retried; the best steering plan found is applied as is.
#[allow(clippy::too_many_arguments)]
pub fn sep_step<R: Rng + ?Sized>(
    model: &GpModel,
    x: &[f64],
    horizon: usize,
    bounds: &ControlBounds,
    region: &BoxBounds,
    config: &OptimizerConfig,
    rng: &mut R,
) -> SepRound {
    let dx = region.dim();
    let (z, h) = match maximize_entropy_point(model, &region.product(bounds), config, rng) {
        Ok((z, h, _)) => (z, h),
        Err(e) => {
            log::warn!("sep target search failed: {e}");
            let (u, status) = greedy_next(model, x, bounds, config, rng);
            let status = if status == PlannerStatus::Planned {
                PlannerStatus::FallbackGreedy
            } else {
                status
            };
            return SepRound {
                controls: vec![u],
                target: None,
                target_entropy: None,
                status,
            };
        }
    };
    let (goal, ug) = z.split_at(dx);
    let (mut controls, status) = match optimize_goal(model, x, goal, horizon, bounds, region, config, rng) {
        Ok(out) => (out.plan.controls.rows(), PlannerStatus::Planned),
        Err(e) => {
            log::warn!("sep steering failed, applying the entropy plan: {e}");
            match optimize_entropy(model, x, horizon, bounds, config, rng, None) {
                Ok(out) => (out.plan.controls.rows(), PlannerStatus::FallbackEntropyPlan),
                Err(e) => {
                    log::warn!("sep entropy plan failed: {e}");
                    (
                        (0..horizon).map(|_| bounds.sample(rng)).collect(),
                        PlannerStatus::FallbackRandom,
                    )
                }
            }
        }
    };
    let mut ug = ug.to_vec();
    bounds.clamp_in_place(&mut ug);
    controls.push(ug);
    SepRound {
        controls,
        target: Some(z),
        target_entropy: Some(h),
        status,
    }
}

/// Strategy-specific memory carried between decisions.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyMemory {
    None,
    Prbs(PrbsState),
    Sep { target: Option<Vec<f64>> },
    Rec { previous: Option<ControlSequence> },
}

/// Everything a strategy knows between decisions.
#[derive(Debug, Clone)]
pub struct ExplorationState {
    pub model: GpModel,
    /// Controls emitted so far.
    pub step: usize,
    pub pending: VecDeque<Vec<f64>>,
    pub memory: StrategyMemory,
}

/// Fixed problem data a strategy plans against.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyContext {
    pub bounds: ControlBounds,
    pub region: BoxBounds,
    pub horizon: usize,
    pub dt: f64,
    pub total_steps: usize,
}

/// Drives one strategy through a trial, one control at a time.
#[derive(Debug, Clone)]
pub struct Explorer {
    kind: StrategyKind,
    context: StrategyContext,
    params: StrategyParams,
    planner: OptimizerConfig,
    state: ExplorationState,
}

impl Explorer {
    pub fn new(
        kind: StrategyKind,
        context: StrategyContext,
        params: StrategyParams,
        planner: OptimizerConfig,
        model: GpModel,
    ) -> Result<Self> {
        params.validate()?;
        planner.validate()?;
        if context.horizon == 0 {
            return Err(Error::Config("planning horizon must be at least 1".into()));
        }
        if model.input_dim() != context.region.dim() + context.bounds.dim() {
            return Err(Error::DimensionMismatch {
                context: "explorer model input",
                expected: context.region.dim() + context.bounds.dim(),
                found: model.input_dim(),
            });
        }
        let memory = match kind {
            StrategyKind::Prbs => StrategyMemory::Prbs(PrbsState::default()),
            StrategyKind::Sep => StrategyMemory::Sep { target: None },
            StrategyKind::Rec => StrategyMemory::Rec { previous: None },
            _ => StrategyMemory::None,
        };
        Ok(Self {
            kind,
            context,
            params,
            planner,
            state: ExplorationState {
                model,
                step: 0,
                pending: VecDeque::new(),
                memory,
            },
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn state(&self) -> &ExplorationState {
        &self.state
    }

    pub fn model(&self) -> &GpModel {
        &self.state.model
    }

    pub fn set_model(&mut self, model: GpModel) {
        self.state.model = model;
    }

    /// True when no planned controls are waiting, i.e. a round just ended.
    pub fn round_complete(&self) -> bool {
        self.state.pending.is_empty()
    }

    /// The next control to apply from state `x`.
    pub fn next_control<R: Rng + ?Sized>(&mut self, x: &[f64], rng: &mut R) -> (Vec<f64>, PlannerStatus) {
        let (u, status) = self.decide(x, rng);
        self.state.step += 1;
        (u, status)
    }

    fn decide<R: Rng + ?Sized>(&mut self, x: &[f64], rng: &mut R) -> (Vec<f64>, PlannerStatus) {
        let ctx = &self.context;
        if let Some(u) = self.state.pending.pop_front() {
            return (u, PlannerStatus::Queued);
        }
        match self.kind {
            StrategyKind::Prbs => {
                let hold = self.params.prbs.max_hold.unwrap_or(ctx.horizon);
                let StrategyMemory::Prbs(s) = &mut self.state.memory else {
                    unreachable!("prbs explorer without prbs memory")
                };
                return (prbs_next(s, &ctx.bounds, hold, rng), PlannerStatus::OpenLoop);
            }
            StrategyKind::Chirp => {
                let u = chirp_next(
                    self.state.step,
                    &ctx.bounds,
                    ctx.dt,
                    ctx.total_steps,
                    &self.params.chirp,
                );
                return (u, PlannerStatus::OpenLoop);
            }
            _ => {}
        }
        if self.state.step < self.params.cold_start_steps {
            return (ctx.bounds.sample(rng), PlannerStatus::ColdStart);
        }
        let model = &self.state.model;
        match self.kind {
            StrategyKind::Greedy => greedy_next(model, x, &ctx.bounds, &self.planner, rng),
            StrategyKind::Rec => {
                let StrategyMemory::Rec { previous } = &mut self.state.memory else {
                    unreachable!("rec explorer without rec memory")
                };
                let warm = previous.as_ref().map(ControlSequence::shifted);
                let (u, plan, status) = rec_step(model, x, ctx.horizon, &ctx.bounds, &self.planner, rng, warm.as_ref());
                *previous = plan;
                (u, status)
            }
            StrategyKind::Pa => {
                let (controls, status) = pa_step(model, x, ctx.horizon, &ctx.bounds, &self.planner, rng);
                self.enqueue(controls, status)
            }
            StrategyKind::Sep => {
                let round = sep_step(model, x, ctx.horizon, &ctx.bounds, &ctx.region, &self.planner, rng);
                if let StrategyMemory::Sep { target } = &mut self.state.memory {
                    *target = round.target.clone();
                }
                self.enqueue(round.controls, round.status)
            }
            StrategyKind::Prbs | StrategyKind::Chirp => unreachable!("open-loop strategies handled above"),
        }
    }

    fn enqueue(&mut self, controls: Vec<Vec<f64>>, status: PlannerStatus) -> (Vec<f64>, PlannerStatus) {
        let mut it = controls.into_iter();
        let first = it.next().expect("planned rounds have at least one control");
        self.state.pending.extend(it);
        (first, status)
    }
}

#[cfg(test)]
mod tests;
