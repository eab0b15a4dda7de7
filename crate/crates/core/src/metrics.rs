//! Evaluation criteria: model RMSE over a random state-action grid and the
//! percentage of the region of interest visited by a trajectory.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::BoxBounds;
use crate::dynamics::DynamicalSystem;
use crate::error::{ensure_len, Error, Result};
use crate::gp::GpModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Number of evaluation points G.
    pub grid_size: usize,
    /// Coverage cells per state dimension; `None` picks
    /// [`default_cells_per_dim`].
    pub cells_per_dim: Option<usize>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            grid_size: 2000,
            cells_per_dim: None,
        }
    }
}

/// 10 cells per dimension in two dimensions, 6 in four; the total stays
/// around a thousand cells.
pub fn default_cells_per_dim(state_dim: usize) -> usize {
    match state_dim {
        0..=2 => 10,
        3 => 8,
        _ => 6,
    }
}

/// Uniform random state-action points with noise-free next states.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl EvaluationGrid {
    /// Draw `size` points from region × control bounds with a dedicated
    /// seed, so every strategy is scored on the same grid.
    pub fn sample(system: &DynamicalSystem, size: usize, seed: u64) -> Result<Self> {
        let spec = system.spec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::with_capacity(size);
        let mut targets = Vec::with_capacity(size);
        for _ in 0..size {
            let x = spec.region_of_interest.sample(&mut rng);
            let u = spec.control_bounds.sample(&mut rng);
            let next = system.true_step(&x, &u)?;
            let mut z = x;
            z.extend_from_slice(&u);
            inputs.push(z);
            targets.push(next);
        }
        Ok(Self { inputs, targets })
    }

    pub fn from_points(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        ensure_len("evaluation grid targets", inputs.len(), targets.len())?;
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// SHA-256 over the little-endian bytes of every input and target.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (z, y) in self.inputs.iter().zip(&self.targets) {
            for v in z.iter().chain(y) {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Pooled root mean square error of the posterior mean over all grid points
/// and output dimensions.
pub fn rmse(model: &GpModel, grid: &EvaluationGrid) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("RMSE needs a non-empty grid".into()));
    }
    let dx = model.output_dim();
    let mut mean = vec![0.0; dx];
    let mut sum = 0.0;
    for (z, y) in grid.inputs.iter().zip(&grid.targets) {
        ensure_len("grid input", model.input_dim(), z.len())?;
        ensure_len("grid target", dx, y.len())?;
        model.predict_mean_into(z, &mut mean);
        sum += mean.iter().zip(y).map(|(m, t)| (m - t).powi(2)).sum::<f64>();
    }
    Ok((sum / (grid.len() * dx) as f64).sqrt())
}

/// Visited cells of a regular discretization of the region of interest.
/// States outside the region count towards the nearest boundary cell.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    region: BoxBounds,
    cells_per_dim: usize,
    visited: HashSet<u64>,
}

impl CoverageGrid {
    pub fn new(region: BoxBounds, cells_per_dim: usize) -> Result<Self> {
        if cells_per_dim == 0 {
            return Err(Error::InvalidArgument(
                "coverage needs at least one cell per dimension".into(),
            ));
        }
        if (cells_per_dim as f64).powi(region.dim() as i32) > u64::MAX as f64 {
            return Err(Error::InvalidArgument("coverage grid has too many cells".into()));
        }
        Ok(Self {
            region,
            cells_per_dim,
            visited: HashSet::new(),
        })
    }

    pub fn total_cells(&self) -> u64 {
        (self.cells_per_dim as u64).pow(self.region.dim() as u32)
    }

    /// Clamped bin coordinates of `x`.
    pub fn cell_of(&self, x: &[f64]) -> Vec<usize> {
        let c = self.cells_per_dim;
        (0..self.region.dim())
            .map(|i| {
                let t = (x[i] - self.region.lower()[i]) / self.region.span(i);
                let b = (t * c as f64).floor();
                if b.is_nan() || b < 0.0 {
                    0
                } else {
                    (b as usize).min(c - 1)
                }
            })
            .collect()
    }

    fn linear_index(&self, cell: &[usize]) -> u64 {
        cell.iter()
            .fold(0u64, |acc, &b| acc * self.cells_per_dim as u64 + b as u64)
    }

    pub fn visit(&mut self, x: &[f64]) {
        let idx = self.linear_index(&self.cell_of(x));
        self.visited.insert(idx);
    }

    pub fn visited_count(&self) -> usize {
        self.visited.len()
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.visited.len() as f64 / self.total_cells() as f64
    }
}

/// Percentage of region cells visited by `states`.
pub fn coverage(states: &[Vec<f64>], region: &BoxBounds, cells_per_dim: usize) -> Result<f64> {
    let mut grid = CoverageGrid::new(region.clone(), cells_per_dim)?;
    for x in states {
        ensure_len("coverage state", region.dim(), x.len())?;
        grid.visit(x);
    }
    Ok(grid.percent())
}
