//! Exact Gaussian-process regression with a squared-exponential ARD kernel.
//!
//! Each output dimension of the learned dynamics is an independent
//! single-output GP over the shared state-action inputs. Models are immutable
//! values: fitting, adding observations and re-optimizing hyperparameters all
//! return new models, so a fitted model can be read from any thread.

mod cholesky;
mod data;
mod hyperopt;
mod kernel;
mod likelihood;
mod model;

pub use cholesky::{factor_with_jitter, PackedCholesky, JITTER_MAX, JITTER_RELATIVE_START, PIVOT_TOLERANCE};
pub use data::Dataset;
pub use hyperopt::{heuristic_init, optimize_hyperparameters, HyperOptOutcome, HyperOptSettings};
pub use kernel::{kernel_eval, Hyperparameters, NOISE_FLOOR};
pub use likelihood::{log_marginal_likelihood, log_marginal_likelihood_value};
pub use model::{entropy, entropy_from_variances, GpModel, Prediction, VARIANCE_FLOOR};
