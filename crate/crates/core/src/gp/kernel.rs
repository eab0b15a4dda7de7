use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};

/// Smallest admissible noise variance.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Hyperparameters of one squared-exponential ARD output model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl Hyperparameters {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let h = Self {
            signal_variance,
            lengthscales,
            noise_variance,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.signal_variance) {
            return Err(Error::InvalidArgument(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if self.lengthscales.is_empty() || !self.lengthscales.iter().all(|&l| positive(l)) {
            return Err(Error::InvalidArgument(format!(
                "lengthscales must be non-empty and positive, got {:?}",
                self.lengthscales
            )));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= NOISE_FLOOR) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be at least {NOISE_FLOOR:e}, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Log-space parameter vector `[log σ_f², log ℓ_1, …, log ℓ_D, log σ_n²]`.
    pub fn to_log_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.lengthscales.len() + 2);
        p.push(self.signal_variance.ln());
        p.extend(self.lengthscales.iter().map(|l| l.ln()));
        p.push(self.noise_variance.ln());
        p
    }

    pub fn from_log_params(params: &[f64]) -> Result<Self> {
        if params.len() < 3 {
            return Err(Error::InvalidArgument(
                "log-parameter vector needs at least three entries".into(),
            ));
        }
        let d = params.len() - 2;
        Self::new(
            params[0].exp(),
            params[1..=d].iter().map(|p| p.exp()).collect(),
            params[d + 1].exp().max(NOISE_FLOOR),
        )
    }

    pub(crate) fn inverse_squared_lengthscales(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| 1.0 / (l * l)).collect()
    }
}

/// Squared-exponential ARD kernel `σ_f² exp(-½ Σ ((a_i - b_i)/ℓ_i)²)`.
pub fn kernel_eval(a: &[f64], b: &[f64], h: &Hyperparameters) -> Result<f64> {
    ensure_len("kernel_eval (a)", h.input_dim(), a.len())?;
    ensure_len("kernel_eval (b)", h.input_dim(), b.len())?;
    ensure_finite("kernel_eval", a)?;
    ensure_finite("kernel_eval", b)?;
    Ok(se_kernel(a, b, &h.inverse_squared_lengthscales(), h.signal_variance))
}

#[inline]
pub(crate) fn se_kernel(a: &[f64], b: &[f64], inv_ls2: &[f64], signal_variance: f64) -> f64 {
    let mut r2 = 0.0;
    for ((x, y), w) in a.iter().zip(b).zip(inv_ls2) {
        let d = x - y;
        r2 += d * d * w;
    }
    signal_variance * (-0.5 * r2).exp()
}
