use std::f64::consts::PI;

use super::cholesky::{factor_with_jitter, PackedCholesky};
use super::data::Dataset;
use super::kernel::{se_kernel, Hyperparameters};
use crate::error::{ensure_len, Error, Result};

fn check(data: &Dataset, h: &Hyperparameters, dim: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument(
            "log marginal likelihood needs at least one observation".into(),
        ));
    }
    if dim >= data.output_dim() {
        return Err(Error::InvalidArgument(format!(
            "output index {dim} out of range for {} outputs",
            data.output_dim()
        )));
    }
    h.validate()?;
    ensure_len("lengthscales", data.input_dim(), h.input_dim())
}

fn signal_gram(data: &Dataset, h: &Hyperparameters) -> Vec<f64> {
    let n = data.len();
    let inv_ls2 = h.inverse_squared_lengthscales();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = se_kernel(data.input(i), data.input(j), &inv_ls2, h.signal_variance);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Factorization of one output's covariance, shared by the value and the
/// gradient.
pub(crate) struct Evaluation {
    k: Vec<f64>,
    chol: PackedCholesky,
    alpha: Vec<f64>,
    pub value: f64,
}

pub(crate) fn evaluate(data: &Dataset, h: &Hyperparameters, dim: usize) -> Result<Evaluation> {
    check(data, h, dim)?;
    let n = data.len();
    let k = signal_gram(data, h);
    let noise = h.noise_variance;
    let (chol, _) = factor_with_jitter(n, h.signal_variance, |i, j| {
        k[i * n + j] + if i == j { noise } else { 0.0 }
    })?;
    let y = data.target_column(dim);
    let alpha = chol.solve(&y);
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let value = -0.5 * fit - chol.half_log_det() - 0.5 * n as f64 * (2.0 * PI).ln();
    Ok(Evaluation { k, chol, alpha, value })
}

/// dL/dθ = ½ tr((ααᵀ - K⁻¹) ∂K/∂θ), summed over the lower triangle.
pub(crate) fn gradient(data: &Dataset, h: &Hyperparameters, ev: &Evaluation) -> Vec<f64> {
    let n = data.len();
    let din = data.input_dim();
    let (k, alpha) = (&ev.k, &ev.alpha);
    let kinv = ev.chol.inverse_packed();
    let inv_ls2 = h.inverse_squared_lengthscales();
    let mut grad = vec![0.0; din + 2];
    let mut trace_w = 0.0;
    let mut pair = vec![0.0; din];
    for i in 0..n {
        let zi = data.input(i);
        let kinv_row = &kinv[i * (i + 1) / 2..];
        pair.iter_mut().for_each(|v| *v = 0.0);
        let mut sf = 0.0;
        for j in 0..i {
            let kw = (alpha[i] * alpha[j] - kinv_row[j]) * k[i * n + j];
            sf += kw;
            let zj = data.input(j);
            for p in 0..din {
                let d = zi[p] - zj[p];
                pair[p] += kw * d * d;
            }
        }
        let w = alpha[i] * alpha[i] - kinv_row[i];
        grad[0] += 2.0 * sf + w * k[i * n + i];
        for p in 0..din {
            grad[p + 1] += 2.0 * pair[p] * inv_ls2[p];
        }
        trace_w += w;
    }
    for g in grad[..=din].iter_mut() {
        *g *= 0.5;
    }
    grad[din + 1] = 0.5 * h.noise_variance * trace_w;
    grad
}

/// Log marginal likelihood of output `dim` only; cheaper than the gradient
/// version, used in line searches.
pub fn log_marginal_likelihood_value(data: &Dataset, h: &Hyperparameters, dim: usize) -> Result<f64> {
    Ok(evaluate(data, h, dim)?.value)
}

/// Log marginal likelihood of output `dim` and its gradient with respect to
/// the log-parameters `[log σ_f², log ℓ_1, …, log ℓ_D, log σ_n²]`.
pub fn log_marginal_likelihood(data: &Dataset, h: &Hyperparameters, dim: usize) -> Result<(f64, Vec<f64>)> {
    let ev = evaluate(data, h, dim)?;
    let g = gradient(data, h, &ev);
    Ok((ev.value, g))
}
