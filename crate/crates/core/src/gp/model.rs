use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use super::cholesky::{factor_from_jitter, PackedCholesky, JITTER_RELATIVE_START, PIVOT_TOLERANCE};
use super::data::Dataset;
use super::kernel::{se_kernel, Hyperparameters};
use crate::error::{ensure_finite, ensure_len, Result};

/// Lower clamp on predicted variances; keeps the entropy finite.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Posterior mean and latent variance per output dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl Prediction {
    pub fn entropy(&self) -> f64 {
        entropy_from_variances(&self.variance)
    }
}

/// Summed differential entropy `Σ_d ½ log(2πe σ_d²)` of independent outputs.
pub fn entropy_from_variances(variances: &[f64]) -> f64 {
    variances.iter().map(|v| 0.5 * (2.0 * PI * E * v).ln()).sum()
}

/// Differential entropy of the model's prediction at `z`.
pub fn entropy(model: &GpModel, z: &[f64]) -> Result<f64> {
    Ok(model.predict(z)?.entropy())
}

#[derive(Debug, Clone)]
struct OutputModel {
    hyper: Hyperparameters,
    inv_ls2: Vec<f64>,
    chol: PackedCholesky,
    alpha: Vec<f64>,
    jitter: f64,
}

impl OutputModel {
    fn diag_term(&self) -> f64 {
        self.hyper.signal_variance + self.hyper.noise_variance + self.jitter
    }

    fn fit(data: &Dataset, dim: usize, hyper: Hyperparameters, min_jitter: f64) -> Result<Self> {
        let inv_ls2 = hyper.inverse_squared_lengthscales();
        let sf2 = hyper.signal_variance;
        let noise = hyper.noise_variance;
        let n = data.len();
        let (chol, jitter) = factor_from_jitter(n, sf2, min_jitter, |i, j| {
            let k = se_kernel(data.input(i), data.input(j), &inv_ls2, sf2);
            if i == j {
                k + noise
            } else {
                k
            }
        })?;
        let alpha = chol.solve(&data.target_column(dim));
        Ok(Self {
            hyper,
            inv_ls2,
            chol,
            alpha,
            jitter,
        })
    }

    /// Extend the factor with rows `start..data.len()`. Returns `false` when a
    /// new pivot is not safely positive.
    fn extend(&mut self, data: &Dataset, dim: usize, start: usize) -> bool {
        let sf2 = self.hyper.signal_variance;
        for i in start..data.len() {
            let zi = data.input(i);
            let mut l: Vec<f64> = (0..i)
                .map(|j| se_kernel(data.input(j), zi, &self.inv_ls2, sf2))
                .collect();
            self.chol.solve_lower_in_place(&mut l);
            let c = self.diag_term();
            let d2 = c - l.iter().map(|v| v * v).sum::<f64>();
            if !d2.is_finite() || d2 <= PIVOT_TOLERANCE * c {
                return false;
            }
            self.chol.push_row(&l, d2.sqrt());
        }
        self.alpha = self.chol.solve(&data.target_column(dim));
        true
    }
}

/// Independent single-output GPs sharing one dataset; zero prior mean.
#[derive(Debug, Clone)]
pub struct GpModel {
    data: Dataset,
    outputs: Vec<OutputModel>,
}

impl GpModel {
    /// Fit one GP per output dimension of `data`.
    pub fn fit(data: Dataset, hypers: Vec<Hyperparameters>) -> Result<Self> {
        ensure_len("hyperparameter sets", data.output_dim(), hypers.len())?;
        for h in &hypers {
            h.validate()?;
            ensure_len("lengthscales", data.input_dim(), h.input_dim())?;
        }
        let outputs = hypers
            .into_iter()
            .enumerate()
            .map(|(d, h)| OutputModel::fit(&data, d, h, 0.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { data, outputs })
    }

    /// Model with no observations.
    pub fn prior(input_dim: usize, hypers: Vec<Hyperparameters>) -> Result<Self> {
        let output_dim = hypers.len();
        Self::fit(Dataset::new(input_dim, output_dim), hypers)
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.data.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn hyperparameters(&self) -> Vec<Hyperparameters> {
        self.outputs.iter().map(|o| o.hyper.clone()).collect()
    }

    pub fn hyperparameters_of(&self, dim: usize) -> &Hyperparameters {
        &self.outputs[dim].hyper
    }

    /// Jitter added to the Gram diagonal of output `dim`.
    pub fn jitter(&self, dim: usize) -> f64 {
        self.outputs[dim].jitter
    }

    pub fn cholesky(&self, dim: usize) -> &PackedCholesky {
        &self.outputs[dim].chol
    }

    pub fn weights(&self, dim: usize) -> &[f64] {
        &self.outputs[dim].alpha
    }

    /// Posterior mean and variance at `z`.
    pub fn predict(&self, z: &[f64]) -> Result<Prediction> {
        ensure_len("predict input", self.input_dim(), z.len())?;
        ensure_finite("predict", z)?;
        let mut mean = vec![0.0; self.output_dim()];
        let mut variance = vec![0.0; self.output_dim()];
        let mut scratch = Vec::new();
        self.predict_into(z, &mut scratch, &mut mean, &mut variance);
        Ok(Prediction { mean, variance })
    }

    /// Allocation-free prediction used by the planners.
    ///
    /// `z` must have the model's input dimension and be finite; no checks are
    /// made here.
    pub fn predict_into(&self, z: &[f64], scratch: &mut Vec<f64>, mean: &mut [f64], variance: &mut [f64]) {
        let n = self.data.len();
        scratch.resize(n, 0.0);
        for (d, out) in self.outputs.iter().enumerate() {
            let sf2 = out.hyper.signal_variance;
            let mut m = 0.0;
            for (i, k) in scratch.iter_mut().enumerate() {
                *k = se_kernel(self.data.input(i), z, &out.inv_ls2, sf2);
                m += *k * out.alpha[i];
            }
            out.chol.solve_lower_in_place(scratch);
            let explained: f64 = scratch.iter().map(|v| v * v).sum();
            mean[d] = m;
            variance[d] = (sf2 - explained).max(VARIANCE_FLOOR);
        }
    }

    /// Posterior mean only.
    pub fn predict_mean_into(&self, z: &[f64], mean: &mut [f64]) {
        for (d, out) in self.outputs.iter().enumerate() {
            let sf2 = out.hyper.signal_variance;
            mean[d] = (0..self.data.len())
                .map(|i| se_kernel(self.data.input(i), z, &out.inv_ls2, sf2) * out.alpha[i])
                .sum();
        }
    }

    /// Differential entropy of the prediction at `z`.
    pub fn entropy(&self, z: &[f64]) -> Result<f64> {
        entropy(self, z)
    }

    /// Model with `new` rows appended under unchanged hyperparameters.
    pub fn add_observations(&self, new: &Dataset) -> Result<Self> {
        let mut next = self.clone();
        next.add_observations_in_place(new)?;
        Ok(next)
    }

    /// In-place variant of [`GpModel::add_observations`].
    ///
    /// Each output factor is extended row by row; if a pivot collapses the
    /// output is refit from scratch with a larger jitter.
    pub fn add_observations_in_place(&mut self, new: &Dataset) -> Result<()> {
        if new.is_empty() {
            return Ok(());
        }
        let start = self.data.len();
        self.data.extend(new)?;
        for d in 0..self.outputs.len() {
            let mut out = self.outputs[d].clone();
            if !out.extend(&self.data, d, start) {
                let sf2 = out.hyper.signal_variance;
                let escalated = (self.outputs[d].jitter * 10.0).max(JITTER_RELATIVE_START * sf2);
                log::debug!("incremental update of output {d} lost definiteness; refitting");
                out = OutputModel::fit(&self.data, d, out.hyper, escalated)?;
            }
            self.outputs[d] = out;
        }
        Ok(())
    }

    /// Same data, new hyperparameters.
    pub fn with_hyperparameters(&self, hypers: Vec<Hyperparameters>) -> Result<Self> {
        Self::fit(self.data.clone(), hypers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hyp(d: usize, sf2: f64, noise: f64) -> Hyperparameters {
        Hyperparameters::new(sf2, vec![0.8; d], noise).unwrap()
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, din: usize, dout: usize) -> Dataset {
        let mut ds = Dataset::new(din, dout);
        for _ in 0..n {
            let z: Vec<f64> = (0..din).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..dout).map(|_| rng.random_range(-1.0..1.0)).collect();
            ds.push(&z, &y).unwrap();
        }
        ds
    }

    fn dense_gram(ds: &Dataset, h: &Hyperparameters) -> DMatrix<f64> {
        let n = ds.len();
        DMatrix::from_fn(n, n, |i, j| {
            crate::gp::kernel_eval(ds.input(i), ds.input(j), h).unwrap() + if i == j { h.noise_variance } else { 0.0 }
        })
    }

    #[test]
    fn empty_model_returns_prior() {
        let m = GpModel::prior(3, vec![hyp(3, 1.7, 0.1), hyp(3, 0.4, 0.1)]).unwrap();
        let p = m.predict(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(p.mean, vec![0.0, 0.0]);
        assert_eq!(p.variance, vec![1.7, 0.4]);
    }

    #[test]
    fn single_point_weight_is_scalar_ratio() {
        let ds = Dataset::from_rows(2, 1, &[(vec![0.5, 0.5], vec![2.0])]).unwrap();
        let m = GpModel::fit(ds, vec![hyp(2, 1.5, 0.25)]).unwrap();
        assert!((m.weights(0)[0] - 2.0 / 1.75).abs() < 1e-15);
    }

    #[test]
    fn weights_match_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = random_dataset(&mut rng, 3, 2, 1);
        let h = hyp(2, 1.2, 0.05);
        let m = GpModel::fit(ds.clone(), vec![h.clone()]).unwrap();
        let k = dense_gram(&ds, &h);
        let alpha = k.try_inverse().unwrap() * DVector::from_vec(ds.target_column(0));
        for i in 0..3 {
            assert!((alpha[i] - m.weights(0)[i]).abs() < 1e-10 * alpha.amax());
        }
    }

    #[test]
    fn factor_reconstructs_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ds = random_dataset(&mut rng, 12, 3, 1);
        let h = hyp(3, 2.0, 0.01);
        let m = GpModel::fit(ds.clone(), vec![h.clone()]).unwrap();
        let l = m.cholesky(0).to_dense();
        let rec = &l * l.transpose();
        let k = dense_gram(&ds, &h);
        assert!((rec - &k).norm() / k.norm() < 1e-8);
        assert!(m.cholesky(0).diagonal().all(|d| d > 0.0));
    }

    #[test]
    fn duplicated_inputs_factor_with_jitter() {
        let rows = vec![
            (vec![0.1, 0.2], vec![1.0]),
            (vec![0.1, 0.2], vec![1.1]),
            (vec![0.1, 0.2], vec![0.9]),
        ];
        let ds = Dataset::from_rows(2, 1, &rows).unwrap();
        let h = Hyperparameters::new(1.0, vec![1.0, 1.0], crate::gp::NOISE_FLOOR).unwrap();
        let m = GpModel::fit(ds, vec![h]).unwrap();
        assert!(m.jitter(0) > 0.0);
        let p = m.predict(&[0.1, 0.2]).unwrap();
        assert!((p.mean[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn interpolates_training_point_as_noise_vanishes() {
        let rows = vec![(vec![0.0], vec![1.5]), (vec![2.0], vec![-0.5])];
        let ds = Dataset::from_rows(1, 1, &rows).unwrap();
        let h = Hyperparameters::new(1.0, vec![1.0], 1e-10).unwrap();
        let m = GpModel::fit(ds, vec![h]).unwrap();
        let p = m.predict(&[0.0]).unwrap();
        assert!((p.mean[0] - 1.5).abs() < 1e-6);
        assert!(p.variance[0] < 1e-8 && p.variance[0] > 0.0);
    }

    #[test]
    fn predict_rejects_bad_input() {
        let m = GpModel::prior(2, vec![hyp(2, 1.0, 0.1)]).unwrap();
        assert!(matches!(m.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(m.predict(&[1.0, f64::INFINITY]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn entropy_identities() {
        let one = 1.0 / (2.0 * PI * E);
        assert!(entropy_from_variances(&[one]).abs() < 1e-15);
        let a = entropy_from_variances(&[0.3]);
        let b = entropy_from_variances(&[0.3 * E * E]);
        assert!((b - a - 1.0).abs() < 1e-14);
        assert!((entropy_from_variances(&[1.0, 1.0]) - 2.837_877_066_409_345_5).abs() < 1e-12);
    }

    #[test]
    fn adding_nothing_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = random_dataset(&mut rng, 5, 2, 2);
        let m = GpModel::fit(ds, vec![hyp(2, 1.0, 0.1), hyp(2, 2.0, 0.1)]).unwrap();
        let m2 = m.add_observations(&Dataset::new(2, 2)).unwrap();
        let z = [0.3, 0.1];
        assert_eq!(m.predict(&z).unwrap(), m2.predict(&z).unwrap());
    }

    #[test]
    fn adding_one_row_equals_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = random_dataset(&mut rng, 6, 3, 2);
        let hs = vec![hyp(3, 1.0, 0.05), hyp(3, 0.5, 0.05)];
        let mut first = Dataset::new(3, 2);
        for i in 0..5 {
            first.push(ds.input(i), ds.target(i)).unwrap();
        }
        let mut last = Dataset::new(3, 2);
        last.push(ds.input(5), ds.target(5)).unwrap();
        let inc = GpModel::fit(first, hs.clone())
            .unwrap()
            .add_observations(&last)
            .unwrap();
        let full = GpModel::fit(ds, hs).unwrap();
        for _ in 0..10 {
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = inc.predict(&z).unwrap();
            let b = full.predict(&z).unwrap();
            for d in 0..2 {
                assert!((a.mean[d] - b.mean[d]).abs() <= 1e-8 * b.mean[d].abs().max(1e-3));
                assert!((a.variance[d] - b.variance[d]).abs() <= 1e-8 * b.variance[d]);
            }
        }
    }

    #[test]
    fn incremental_duplicate_falls_back_to_refit() {
        let rows = vec![(vec![0.0], vec![1.0])];
        let ds = Dataset::from_rows(1, 1, &rows).unwrap();
        let h = Hyperparameters::new(1.0, vec![1.0], crate::gp::NOISE_FLOOR).unwrap();
        let m = GpModel::fit(ds.clone(), vec![h]).unwrap();
        let m2 = m.add_observations(&ds).unwrap();
        assert_eq!(m2.len(), 2);
        assert!(m2.jitter(0) > 0.0);
    }
}
