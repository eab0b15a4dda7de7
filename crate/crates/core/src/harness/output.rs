use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{render_table, run_benchmark, BenchmarkReport, CellSummary, CurvePoint};
use super::trial::{TrialResult, TrialStatus};
use super::{BenchmarkConfig, BenchmarkPlan};
use crate::dynamics::SystemsFile;
use crate::error::{Error, Result};
use crate::strategies::StrategyKind;

pub const TRIALS_HEADER: [&str; 8] = [
    "system",
    "strategy",
    "seed",
    "step",
    "rmse",
    "coverage_final",
    "wall_s",
    "status",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "system",
    "strategy",
    "trials_ok",
    "trials_failed",
    "rmse_mean",
    "rmse_std",
    "rmse_median",
    "coverage_mean",
    "coverage_std",
    "coverage_median",
];

const CURVES_HEADER: [&str; 6] = ["system", "strategy", "step", "trials", "rmse_mean", "rmse_std"];

pub const MANIFEST_FORMAT: &str = "excite-run/1";

/// One line of `trials.csv`: a checkpoint of a successful trial, or the
/// single line of a failed one (empty `rmse` and `coverage_final`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub system: String,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub step: usize,
    pub rmse: Option<f64>,
    pub coverage_final: Option<f64>,
    pub wall_s: f64,
    pub status: String,
}

impl TrialRow {
    pub fn from_results(trials: &[TrialResult]) -> Vec<TrialRow> {
        let mut rows = Vec::new();
        for t in trials {
            let row = |step, rmse, coverage_final| TrialRow {
                system: t.system.clone(),
                strategy: t.strategy,
                seed: t.seed,
                step,
                rmse,
                coverage_final,
                wall_s: t.wall_seconds,
                status: t.status.label().to_string(),
            };
            match &t.status {
                TrialStatus::Ok => rows.extend(
                    t.checkpoints
                        .iter()
                        .map(|c| row(c.step, Some(c.rmse), Some(t.coverage_final))),
                ),
                TrialStatus::Failed { step, .. } => rows.push(row(*step, None, None)),
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestExperiment {
    pub system: String,
    pub strategy: StrategyKind,
    pub steps: usize,
    pub horizon: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub system: String,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub step: usize,
    pub reason: String,
}

/// Everything needed to rerun a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub config: BenchmarkConfig,
    pub systems: SystemsFile,
    pub experiments: Vec<ManifestExperiment>,
    pub grid_hashes: BTreeMap<String, String>,
    pub failures: Vec<FailureNote>,
}

impl Manifest {
    pub fn from_report(report: &BenchmarkReport) -> Self {
        let mut systems = report.plan.systems.clone();
        systems.systems.retain(|k, _| report.plan.config.systems.contains(k));
        Self {
            format: MANIFEST_FORMAT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: report.plan.config.clone(),
            systems,
            experiments: report
                .experiments
                .iter()
                .map(|e| ManifestExperiment {
                    system: e.system.clone(),
                    strategy: e.strategy,
                    steps: e.steps,
                    horizon: e.horizon,
                    seeds: e.seeds(),
                })
                .collect(),
            grid_hashes: report.grid_hashes.clone(),
            failures: report
                .trials
                .iter()
                .filter_map(|t| match &t.status {
                    TrialStatus::Failed { step, reason } => Some(FailureNote {
                        system: t.system.clone(),
                        strategy: t.strategy,
                        seed: t.seed,
                        step: *step,
                        reason: reason.clone(),
                    }),
                    TrialStatus::Ok => None,
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let m: Manifest = serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Config(format!(
                "{}: unsupported manifest format `{}`",
                path.display(),
                m.format
            )));
        }
        Ok(m)
    }

    pub fn plan(&self) -> BenchmarkPlan {
        BenchmarkPlan::new(self.config.clone(), self.systems.clone())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], records: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let found: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Config(format!(
            "{}: unexpected header {}",
            path.display(),
            found.join(",")
        )));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

pub fn parse_trials_csv(path: &Path) -> Result<Vec<TrialRow>> {
    read_csv(path, &TRIALS_HEADER)
}

pub fn parse_summary_csv(path: &Path) -> Result<Vec<CellSummary>> {
    read_csv(path, &SUMMARY_HEADER)
}

pub fn parse_curves_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    read_csv(path, &CURVES_HEADER)
}

/// Writes `trials.csv`, `summary.csv`, `curves.csv`, `table.txt` and
/// `manifest.json` into `dir`, creating it if needed. Only `trials.csv`
/// holds wall-clock times; every other file is reproducible.
pub fn emit_results(report: &BenchmarkReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let trials = dir.join("trials.csv");
    write_csv(&trials, &TRIALS_HEADER, &TrialRow::from_results(&report.trials))?;
    let summary = dir.join("summary.csv");
    write_csv(&summary, &SUMMARY_HEADER, &report.summaries)?;
    let curves = dir.join("curves.csv");
    write_csv(&curves, &CURVES_HEADER, &report.curves)?;
    let table = dir.join("table.txt");
    std::fs::write(&table, render_table(report)).map_err(io_err(&table))?;
    let manifest = dir.join("manifest.json");
    let mut f = File::create(&manifest).map_err(io_err(&manifest))?;
    serde_json::to_writer_pretty(&mut f, &Manifest::from_report(report)).map_err(|source| Error::Json {
        path: manifest.clone(),
        source,
    })?;
    writeln!(f).map_err(io_err(&manifest))?;
    Ok(vec![trials, summary, curves, table, manifest])
}

/// Reruns the benchmark recorded in a manifest and writes its results to
/// `out`. Fails if the regenerated evaluation grids differ.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<BenchmarkReport> {
    let manifest = Manifest::load(manifest_path)?;
    let report = run_benchmark(&manifest.plan())?;
    if report.grid_hashes != manifest.grid_hashes {
        return Err(Error::Config(format!(
            "{}: evaluation grids differ from the recorded run",
            manifest_path.display()
        )));
    }
    emit_results(&report, out)?;
    Ok(report)
}
