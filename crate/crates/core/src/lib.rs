//! Active exploration for learning unknown dynamics with Gaussian processes.
//!
//! The crate couples exact GP regression ([`gp`]) with simulated plants
//! ([`dynamics`]), an entropy-maximizing trajectory optimizer ([`trajopt`]),
//! six excitation strategies ([`strategies`]) and the evaluation metrics and
//! experiment harness used to compare them ([`metrics`], [`harness`]).

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod gp;
pub mod harness;
pub mod metrics;
pub mod strategies;
pub mod trajopt;

pub use bounds::BoxBounds;
pub use dynamics::{DynamicalSystem, SystemSpec, Trajectory};
pub use error::{Error, Result};
pub use gp::{Dataset, GpModel, Hyperparameters, Prediction};
pub use harness::{BenchmarkConfig, BenchmarkPlan, BenchmarkReport, ExperimentConfig, TrialResult};
pub use metrics::{CoverageGrid, EvaluationGrid};
pub use strategies::StrategyKind;
pub use trajopt::{ControlBounds, ControlSequence, OptimizerConfig, PlannedTrajectory};
