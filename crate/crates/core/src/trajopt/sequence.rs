use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::BoxBounds;
use crate::error::{ensure_finite, Error, Result};

/// Control bounds `U`, one interval per actuator.
pub type ControlBounds = BoxBounds;

/// An `M × d_u` control trajectory, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    control_dim: usize,
    data: Vec<f64>,
}

impl ControlSequence {
    /// Zero-length sequence; only rollouts accept it.
    pub fn empty(control_dim: usize) -> Self {
        Self {
            control_dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], bounds: &ControlBounds) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * bounds.dim());
        for r in rows {
            data.extend_from_slice(r);
        }
        Self::from_flat(data, bounds)
    }

    pub fn from_flat(data: Vec<f64>, bounds: &ControlBounds) -> Result<Self> {
        let d = bounds.dim();
        if !data.len().is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "{} control entries do not form rows of width {d}",
                data.len()
            )));
        }
        ensure_finite("control sequence", &data)?;
        let seq = Self { control_dim: d, data };
        if let Some(i) = seq.iter().position(|u| !bounds.contains(u)) {
            return Err(Error::InvalidArgument(format!(
                "control {i} {:?} violates the bounds",
                seq.row(i)
            )));
        }
        Ok(seq)
    }

    /// `horizon` copies of `u`.
    pub fn constant(u: &[f64], horizon: usize, bounds: &ControlBounds) -> Result<Self> {
        Self::from_flat(u.repeat(horizon), bounds)
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.control_dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.control_dim..(i + 1) * self.control_dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.control_dim.max(1))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.control_dim, &self.data)
    }

    /// `Σ_i |u_i|²`
    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Drop the first control and repeat the last, keeping the length.
    pub fn shifted(&self) -> Self {
        if self.len() <= 1 {
            return self.clone();
        }
        let d = self.control_dim;
        let mut data = self.data[d..].to_vec();
        data.extend_from_slice(&self.data[self.data.len() - d..]);
        Self { control_dim: d, data }
    }

    /// Same controls truncated or padded (repeating the last row) to `len`.
    pub fn resized(&self, len: usize) -> Self {
        let d = self.control_dim;
        let mut data: Vec<f64> = self.data.iter().copied().take(len * d).collect();
        while data.len() < len * d {
            let last = data[data.len() - d..].to_vec();
            data.extend_from_slice(&last);
        }
        Self { control_dim: d, data }
    }
}
