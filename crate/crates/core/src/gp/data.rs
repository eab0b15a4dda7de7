use nalgebra::DMatrix;

use crate::error::{ensure_finite, ensure_len, Error, Result};

/// State-action inputs `z_k = (x_k, u_k)` and noisy next-state targets.
///
/// Rows are stored contiguously so kernel evaluations against the whole
/// dataset stream through memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_dim: usize,
    output_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn from_matrices(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Self> {
        ensure_len("dataset rows", inputs.nrows(), targets.nrows())?;
        let mut ds = Self::new(inputs.ncols(), targets.ncols());
        for i in 0..inputs.nrows() {
            let z: Vec<f64> = inputs.row(i).iter().copied().collect();
            let y: Vec<f64> = targets.row(i).iter().copied().collect();
            ds.push(&z, &y)?;
        }
        Ok(ds)
    }

    pub fn from_rows(input_dim: usize, output_dim: usize, rows: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let mut ds = Self::new(input_dim, output_dim);
        for (z, y) in rows {
            ds.push(z, y)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, input: &[f64], target: &[f64]) -> Result<()> {
        ensure_len("dataset input", self.input_dim, input.len())?;
        ensure_len("dataset target", self.output_dim, target.len())?;
        ensure_finite("dataset input", input)?;
        ensure_finite("dataset target", target)?;
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
        Ok(())
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.input_dim != self.input_dim || other.output_dim != self.output_dim {
            return Err(Error::InvalidArgument(
                "cannot concatenate datasets of different shapes".into(),
            ));
        }
        self.inputs.extend_from_slice(&other.inputs);
        self.targets.extend_from_slice(&other.targets);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    #[inline]
    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    #[inline]
    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.output_dim..(i + 1) * self.output_dim]
    }

    /// Targets of one output dimension.
    pub fn target_column(&self, dim: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.target(i)[dim]).collect()
    }

    pub fn inputs_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.input_dim, &self.inputs)
    }

    pub fn targets_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.output_dim, &self.targets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_roundtrip_through_matrices() {
        let ds = Dataset::from_rows(2, 1, &[(vec![1.0, 2.0], vec![3.0]), (vec![4.0, 5.0], vec![6.0])]).unwrap();
        assert_eq!(ds.len(), 2);
        let back = Dataset::from_matrices(&ds.inputs_matrix(), &ds.targets_matrix()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(ds.target_column(0), vec![3.0, 6.0]);
    }

    #[test]
    fn rejects_bad_rows() {
        let mut ds = Dataset::new(2, 1);
        assert!(ds.push(&[1.0], &[0.0]).is_err());
        assert!(ds.push(&[1.0, f64::NAN], &[0.0]).is_err());
        assert!(ds.is_empty());
    }
}
