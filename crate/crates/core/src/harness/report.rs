use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::TrialRow;
use super::trial::{run_trial, TrialResult};
use super::{BenchmarkPlan, ExperimentConfig};
use crate::error::Result;
use crate::metrics::EvaluationGrid;
use crate::strategies::StrategyKind;

/// Final RMSE and coverage statistics of one (system, strategy) cell.
/// Statistics are `None` when no trial of the cell succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub system: String,
    pub strategy: StrategyKind,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub rmse_mean: Option<f64>,
    pub rmse_std: Option<f64>,
    pub rmse_median: Option<f64>,
    pub coverage_mean: Option<f64>,
    pub coverage_std: Option<f64>,
    pub coverage_median: Option<f64>,
}

/// RMSE statistics over successful trials at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub system: String,
    pub strategy: StrategyKind,
    pub step: usize,
    pub trials: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub plan: BenchmarkPlan,
    pub experiments: Vec<ExperimentConfig>,
    pub trials: Vec<TrialResult>,
    pub summaries: Vec<CellSummary>,
    pub curves: Vec<CurvePoint>,
    /// Evaluation grid hash per system.
    pub grid_hashes: BTreeMap<String, String>,
}

impl BenchmarkReport {
    pub fn summary(&self, system: &str, strategy: StrategyKind) -> Option<&CellSummary> {
        self.summaries
            .iter()
            .find(|s| s.system == system && s.strategy == strategy)
    }

    pub fn trials_of(&self, system: &str, strategy: StrategyKind) -> impl Iterator<Item = &TrialResult> {
        let system = system.to_string();
        self.trials
            .iter()
            .filter(move |t| t.system == system && t.strategy == strategy)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for a single value.
fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Cell summaries and RMSE curves from per-trial rows, in the given cell
/// order. Rows of failed trials count as failures only.
pub fn aggregate(rows: &[TrialRow], cells: &[(String, StrategyKind)]) -> (Vec<CellSummary>, Vec<CurvePoint>) {
    let mut summaries = Vec::with_capacity(cells.len());
    let mut curves = Vec::new();
    for (system, strategy) in cells {
        let mine: Vec<&TrialRow> = rows
            .iter()
            .filter(|r| &r.system == system && r.strategy == *strategy)
            .collect();
        // final row of each successful trial, keyed by seed
        let mut finals: BTreeMap<u64, &TrialRow> = BTreeMap::new();
        let mut failed = std::collections::BTreeSet::new();
        let mut by_step: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &mine {
            if r.status != "ok" {
                failed.insert(r.seed);
                continue;
            }
            if let Some(e) = r.rmse {
                by_step.entry(r.step).or_default().push(e);
            }
            let slot = finals.entry(r.seed).or_insert(r);
            if r.step > slot.step {
                *slot = r;
            }
        }
        let rmse: Vec<f64> = finals.values().filter_map(|r| r.rmse).collect();
        let cov: Vec<f64> = finals.values().filter_map(|r| r.coverage_final).collect();
        let stats = |v: &[f64]| {
            if v.is_empty() {
                (None, None, None)
            } else {
                (Some(mean(v)), Some(sample_std(v)), Some(median(v)))
            }
        };
        let (rmse_mean, rmse_std, rmse_median) = stats(&rmse);
        let (coverage_mean, coverage_std, coverage_median) = stats(&cov);
        summaries.push(CellSummary {
            system: system.clone(),
            strategy: *strategy,
            trials_ok: finals.len(),
            trials_failed: failed.len(),
            rmse_mean,
            rmse_std,
            rmse_median,
            coverage_mean,
            coverage_std,
            coverage_median,
        });
        for (step, v) in by_step {
            curves.push(CurvePoint {
                system: system.clone(),
                strategy: *strategy,
                step,
                trials: v.len(),
                rmse_mean: mean(&v),
                rmse_std: sample_std(&v),
            });
        }
    }
    (summaries, curves)
}

/// Runs every trial of every experiment on a shared per-system evaluation
/// grid. Trials run in parallel; results keep experiment and seed order.
pub fn run_benchmark(plan: &BenchmarkPlan) -> Result<BenchmarkReport> {
    let experiments = plan.experiments()?;
    let mut systems = BTreeMap::new();
    let mut grids = BTreeMap::new();
    for e in &experiments {
        if systems.contains_key(&e.system) {
            continue;
        }
        let sys = plan.systems.build(&e.system)?;
        let grid = EvaluationGrid::sample(&sys, e.metrics.grid_size, e.grid_seed)?;
        systems.insert(e.system.clone(), sys);
        grids.insert(e.system.clone(), grid);
    }
    let jobs: Vec<(&ExperimentConfig, u64)> = experiments
        .iter()
        .flat_map(|e| e.seeds().into_iter().map(move |s| (e, s)))
        .collect();
    log::info!("running {} trials", jobs.len());
    let trials: Vec<TrialResult> = jobs
        .par_iter()
        .map(|(e, seed)| {
            let t = run_trial(e, &systems[&e.system], &grids[&e.system], *seed);
            log::info!(
                "{} / {} seed {}: {} in {:.1}s, final rmse {:?}, coverage {:.1}%",
                t.system,
                t.strategy,
                t.seed,
                t.status.label(),
                t.wall_seconds,
                t.final_rmse(),
                t.coverage_final
            );
            t
        })
        .collect();
    let cells: Vec<(String, StrategyKind)> = experiments.iter().map(|e| (e.system.clone(), e.strategy)).collect();
    let rows = TrialRow::from_results(&trials);
    let (summaries, curves) = aggregate(&rows, &cells);
    Ok(BenchmarkReport {
        plan: plan.clone(),
        grid_hashes: grids.iter().map(|(k, g)| (k.clone(), g.hash())).collect(),
        experiments,
        trials,
        summaries,
        curves,
    })
}

fn cell_text(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.3} ± {s:.3}"),
        _ => "missing".into(),
    }
}

/// Plain-text table: one row per strategy, final RMSE and coverage
/// columns per system.
pub fn render_table(report: &BenchmarkReport) -> String {
    let mut systems: Vec<&str> = Vec::new();
    let mut strategies: Vec<StrategyKind> = Vec::new();
    for s in &report.summaries {
        if !systems.contains(&s.system.as_str()) {
            systems.push(&s.system);
        }
        if !strategies.contains(&s.strategy) {
            strategies.push(s.strategy);
        }
    }
    strategies.sort_by_key(|k| StrategyKind::TABLE_ORDER.iter().position(|t| t == k));
    let mut header = vec!["strategy".to_string()];
    for sys in &systems {
        header.push(format!("{sys} rmse"));
        header.push(format!("{sys} coverage %"));
    }
    let mut rows = vec![header];
    for k in &strategies {
        let mut row = vec![k.to_string()];
        for sys in &systems {
            match report.summary(sys, *k) {
                Some(s) => {
                    row.push(cell_text(s.rmse_mean, s.rmse_std));
                    row.push(cell_text(s.coverage_mean, s.coverage_std));
                }
                None => {
                    row.push("-".into());
                    row.push("-".into());
                }
            }
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v}{}", " ".repeat(w - v.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
