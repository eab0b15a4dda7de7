use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use excite::dynamics::SystemsFile;
use excite::harness::{emit_results, render_table, replay, run_benchmark, BenchmarkPlan};
use excite::StrategyKind;

/// Active exploration benchmark for GP dynamics models.
#[derive(Parser)]
#[command(name = "excite", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Only run these systems (comma separated).
        #[arg(long, value_delimiter = ',')]
        system: Vec<String>,
        /// Only run these strategies (comma separated).
        #[arg(long, value_delimiter = ',')]
        strategy: Vec<StrategyKind>,
        #[arg(long)]
        trials: Option<usize>,
        /// Base seed; trial i uses seed ^ i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Rerun the benchmark recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Defaults to a `replay` directory next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show the systems of the built-in (or a given) systems file.
    ListSystems {
        #[arg(long)]
        systems_file: Option<PathBuf>,
    },
    /// Show the available strategies.
    ListStrategies,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            system,
            strategy,
            trials,
            seed,
            out,
        } => {
            let mut plan = BenchmarkPlan::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if !system.is_empty() {
                plan.config.systems = system;
            }
            if !strategy.is_empty() {
                plan.config.strategies = strategy;
            }
            if let Some(t) = trials {
                plan.config.trials = t;
            }
            if let Some(s) = seed {
                plan.config.base_seed = s;
            }
            let report = run_benchmark(&plan)?;
            finish(&report, &out)
        }
        Command::Replay { manifest, out } => {
            let out = out.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("replay"));
            let report = replay(&manifest, &out).with_context(|| format!("replaying {}", manifest.display()))?;
            finish(&report, &out)
        }
        Command::ListSystems { systems_file } => {
            let file = match systems_file {
                Some(p) => SystemsFile::load(&p)?,
                None => SystemsFile::default_file()?,
            };
            for name in file.names() {
                let e = file.entry(name)?;
                let (dx, du) = e.physics.dims();
                println!(
                    "{name:<10} state {dx}  control {du}  dt {}  steps {}  horizon {}",
                    e.dt, e.steps, e.horizon
                );
            }
            Ok(())
        }
        Command::ListStrategies => {
            for k in StrategyKind::TABLE_ORDER {
                println!("{:<7} {}", k.name(), k.description());
            }
            Ok(())
        }
    }
}

fn finish(report: &excite::BenchmarkReport, out: &Path) -> Result<()> {
    let files = emit_results(report, out)?;
    print!("{}", render_table(report));
    for f in files {
        log::info!("wrote {}", f.display());
    }
    let failed = report.trials.iter().filter(|t| !t.status.is_ok()).count();
    if failed == report.trials.len() && failed > 0 {
        bail!("every trial failed");
    }
    Ok(())
}
