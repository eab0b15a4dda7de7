use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::kernel::Hyperparameters;
use super::likelihood::{evaluate, gradient, log_marginal_likelihood_value, Evaluation};
use crate::error::{Error, Result};

/// Multi-start projected gradient ascent on the log marginal likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperOptSettings {
    /// Number of starting points; the first is always the supplied init.
    pub restarts: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Stop a restart once one accepted step improves the objective by less
    /// than this fraction of `1 + |L|`.
    pub value_tolerance: f64,
    /// When false the noise variance is held at its initial value.
    pub learn_noise: bool,
    /// Standard deviation of the log-space perturbation for extra restarts.
    pub perturbation: f64,
    pub log_signal_variance_bounds: (f64, f64),
    pub log_lengthscale_bounds: (f64, f64),
    pub seed: u64,
}

impl Default for HyperOptSettings {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_iterations: 100,
            gradient_tolerance: 1e-5,
            value_tolerance: 1e-9,
            learn_noise: false,
            perturbation: 0.5,
            log_signal_variance_bounds: (1e-6f64.ln(), 1e6f64.ln()),
            log_lengthscale_bounds: (1e-3f64.ln(), 1e3f64.ln()),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperOptOutcome {
    pub hyperparameters: Hyperparameters,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    /// False when no restart beat the initial point; `hyperparameters` is
    /// then the init, unchanged.
    pub improved: bool,
    pub iterations: usize,
}

/// Data-driven starting point: lengthscales from input spreads, signal
/// variance from the target spread, noise as given.
pub fn heuristic_init(data: &Dataset, dim: usize, noise_variance: f64) -> Hyperparameters {
    let n = data.len() as f64;
    let spread = |values: &mut dyn Iterator<Item = f64>| -> Option<f64> {
        let v: Vec<f64> = values.collect();
        if v.len() < 2 {
            return None;
        }
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var.is_finite() && var > 1e-12).then_some(var)
    };
    let lengthscales = (0..data.input_dim())
        .map(|p| {
            spread(&mut (0..data.len()).map(|i| data.input(i)[p]))
                .map(f64::sqrt)
                .unwrap_or(1.0)
        })
        .collect();
    let signal_variance = if dim < data.output_dim() {
        spread(&mut (0..data.len()).map(|i| data.target(i)[dim])).unwrap_or(1.0)
    } else {
        1.0
    };
    Hyperparameters {
        signal_variance,
        lengthscales,
        noise_variance: noise_variance.max(super::NOISE_FLOOR),
    }
}

struct Ascent<'a> {
    data: &'a Dataset,
    dim: usize,
    settings: &'a HyperOptSettings,
    /// Exact noise variance when it is not learned.
    fixed_noise: Option<f64>,
}

impl Ascent<'_> {
    fn hyper(&self, p: &[f64]) -> Result<Hyperparameters> {
        let mut h = Hyperparameters::from_log_params(p)?;
        if let Some(noise) = self.fixed_noise {
            h.noise_variance = noise;
        }
        Ok(h)
    }

    fn project(&self, p: &mut [f64], fixed_noise: f64) {
        let d = p.len() - 2;
        let (slo, shi) = self.settings.log_signal_variance_bounds;
        let (llo, lhi) = self.settings.log_lengthscale_bounds;
        p[0] = p[0].clamp(slo, shi);
        for v in &mut p[1..=d] {
            *v = v.clamp(llo, lhi);
        }
        if !self.settings.learn_noise {
            p[d + 1] = fixed_noise;
        } else {
            p[d + 1] = p[d + 1].max(super::NOISE_FLOOR.ln());
        }
    }

    fn evaluate(&self, p: &[f64]) -> Option<(Hyperparameters, Evaluation)> {
        let h = self.hyper(p).ok()?;
        let ev = evaluate(self.data, &h, self.dim).ok()?;
        ev.value.is_finite().then_some((h, ev))
    }

    fn gradient(&self, h: &Hyperparameters, ev: &Evaluation) -> Vec<f64> {
        let mut g = gradient(self.data, h, ev);
        if !self.settings.learn_noise {
            let last = g.len() - 1;
            g[last] = 0.0;
        }
        g
    }

    /// Returns (log params, value, iterations).
    fn run(&self, start: &[f64]) -> Option<(Vec<f64>, f64, usize)> {
        let fixed_noise = start[start.len() - 1];
        let mut theta = start.to_vec();
        self.project(&mut theta, fixed_noise);
        let (h0, ev0) = self.evaluate(&theta)?;
        let mut f = ev0.value;
        let mut g = self.gradient(&h0, &ev0);
        let mut step = 1.0 / norm(&g).max(1.0);
        let mut iterations = 0;
        while iterations < self.settings.max_iterations {
            if norm(&g) < self.settings.gradient_tolerance {
                break;
            }
            iterations += 1;
            let mut accepted = None;
            for _ in 0..40 {
                let mut cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t + step * gi).collect();
                self.project(&mut cand, fixed_noise);
                let moved: f64 = cand.iter().zip(&theta).zip(&g).map(|((c, t), gi)| (c - t) * gi).sum();
                if moved <= 0.0 {
                    break;
                }
                if let Some((h, ev)) = self.evaluate(&cand) {
                    if ev.value >= f + 1e-4 * moved {
                        accepted = Some((cand, h, ev));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((cand, h, ev)) = accepted else { break };
            let gain = ev.value - f;
            theta = cand;
            f = ev.value;
            g = self.gradient(&h, &ev);
            step *= 2.0;
            if gain < self.settings.value_tolerance * (1.0 + f.abs()) {
                break;
            }
        }
        Some((theta, f, iterations))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maximize the log marginal likelihood of output `dim` over the kernel
/// hyperparameters.
///
/// Restarts are, in order: `init`, the data heuristic, then random log-space
/// perturbations of `init`. The result never has a lower likelihood than
/// `init`.
pub fn optimize_hyperparameters(
    data: &Dataset,
    dim: usize,
    init: &Hyperparameters,
    settings: &HyperOptSettings,
) -> Result<HyperOptOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot optimize hyperparameters without data".into(),
        ));
    }
    init.validate()?;
    let ascent = Ascent {
        data,
        dim,
        settings,
        fixed_noise: (!settings.learn_noise).then_some(init.noise_variance),
    };
    let init_params = init.to_log_params();
    let initial = log_marginal_likelihood_value(data, init, dim).unwrap_or(f64::NEG_INFINITY);

    let mut starts = Vec::with_capacity(settings.restarts);
    if settings.restarts >= 1 {
        starts.push(init_params.clone());
    }
    if settings.restarts >= 2 {
        starts.push(heuristic_init(data, dim, init.noise_variance).to_log_params());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ ((data.len() as u64) << 32) ^ dim as u64);
    while starts.len() < settings.restarts {
        let mut p = init_params.clone();
        let last = p.len() - 1;
        for v in &mut p[..last] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += settings.perturbation * z;
        }
        starts.push(p);
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut iterations = 0;
    for s in &starts {
        if let Some((p, f, it)) = ascent.run(s) {
            iterations += it;
            if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
                best = Some((p, f));
            }
        }
    }

    match best {
        Some((p, f)) if f > initial => {
            let hyperparameters = ascent.hyper(&p)?;
            Ok(HyperOptOutcome {
                hyperparameters,
                log_likelihood: f,
                initial_log_likelihood: initial,
                improved: true,
                iterations,
            })
        }
        _ => {
            if settings.restarts > 0 && settings.max_iterations > 0 {
                log::debug!("hyperparameter search for output {dim} did not improve on init");
            }
            Ok(HyperOptOutcome {
                hyperparameters: init.clone(),
                log_likelihood: initial,
                initial_log_likelihood: initial,
                improved: false,
                iterations,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sine_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = Dataset::new(2, 1);
        for _ in 0..n {
            let z = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let noise: f64 = StandardNormal.sample(&mut rng);
            ds.push(&z, &[z[0].sin() + 0.05 * noise]).unwrap();
        }
        ds
    }

    #[test]
    fn zero_iterations_returns_init() {
        let ds = sine_data(20, 1);
        let init = Hyperparameters::new(0.3, vec![2.0, 0.4], 0.01).unwrap();
        let settings = HyperOptSettings {
            restarts: 1,
            max_iterations: 0,
            ..Default::default()
        };
        let out = optimize_hyperparameters(&ds, 0, &init, &settings).unwrap();
        assert_eq!(out.hyperparameters, init);
        assert!(!out.improved);
    }

    #[test]
    fn ascent_never_loses_likelihood_and_keeps_noise() {
        let ds = sine_data(30, 2);
        let init = Hyperparameters::new(0.1, vec![0.1, 0.1], 0.0025).unwrap();
        let out = optimize_hyperparameters(&ds, 0, &init, &HyperOptSettings::default()).unwrap();
        assert!(out.improved);
        assert!(out.log_likelihood >= out.initial_log_likelihood);
        assert_eq!(out.hyperparameters.noise_variance, 0.0025);
        // the irrelevant second input should get a longer lengthscale
        assert!(out.hyperparameters.lengthscales[1] > out.hyperparameters.lengthscales[0]);
        out.hyperparameters.validate().unwrap();
    }

    #[test]
    fn heuristic_handles_degenerate_columns() {
        let ds = Dataset::from_rows(2, 1, &[(vec![1.0, 0.0], vec![2.0]), (vec![1.0, 2.0], vec![2.0])]).unwrap();
        let h = heuristic_init(&ds, 0, 0.05);
        assert_eq!(h.lengthscales[0], 1.0);
        assert!((h.lengthscales[1] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(h.signal_variance, 1.0);
    }
}
