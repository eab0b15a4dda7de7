//! Box-constrained derivative-free maximization: a cross-entropy population
//! search with elite retention, then coordinate-wise finite-difference
//! refinement of the incumbent. On small boxes the first population includes
//! a regular lattice.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::OptimizerConfig;
use crate::bounds::BoxBounds;

/// What happened during one search; used for diagnostics and tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    /// Best value among all initial-population candidates of all restarts.
    pub initial_best: f64,
    /// Incumbent after each population iteration and refinement pass.
    pub best_per_iteration: Vec<f64>,
    /// Objective of each supplied seed, in order.
    pub seed_values: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SearchResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub trace: SearchTrace,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximize `objective` over `bounds`. Non-finite objective values count as
/// failures. `seeds` are injected into the first restart's initial
/// population.
pub(crate) fn maximize<R, F>(
    bounds: &BoxBounds,
    seeds: &[Vec<f64>],
    config: &OptimizerConfig,
    rng: &mut R,
    mut objective: F,
) -> Option<SearchResult>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    let dim = bounds.dim();
    let n_elite = config.elite_count();
    let mut trace = SearchTrace {
        initial_best: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        sanitize(objective(x))
    };

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let consider = |incumbent: &mut Option<(Vec<f64>, f64)>, x: &[f64], f: f64| {
        if f > f64::NEG_INFINITY && incumbent.as_ref().is_none_or(|(_, best)| f > *best) {
            *incumbent = Some((x.to_vec(), f));
        }
    };

    for restart in 0..config.restarts {
        let mut population: Vec<(Vec<f64>, f64)> = Vec::with_capacity(config.population_size);
        if restart == 0 {
            for s in seeds.iter().take(config.population_size) {
                let mut x = s.clone();
                bounds.clamp_in_place(&mut x);
                let f = eval(&x);
                trace.seed_values.push(f);
                population.push((x, f));
            }
            for x in lattice(bounds, config.population_size / 2) {
                if population.len() >= config.population_size {
                    break;
                }
                let f = eval(&x);
                population.push((x, f));
            }
        }
        while population.len() < config.population_size {
            let x = bounds.sample(rng);
            let f = eval(&x);
            population.push((x, f));
        }
        for (x, f) in &population {
            trace.initial_best = trace.initial_best.max(*f);
            consider(&mut incumbent, x, *f);
        }

        for _ in 0..config.iterations {
            population.sort_by(|a, b| b.1.total_cmp(&a.1));
            population.truncate(n_elite);
            let (mean, std) = elite_moments(&population, bounds, config.min_std_fraction);
            while population.len() < config.population_size {
                let mut x: Vec<f64> = (0..dim)
                    .map(|i| {
                        let z: f64 = StandardNormal.sample(rng);
                        mean[i] + std[i] * z
                    })
                    .collect();
                bounds.clamp_in_place(&mut x);
                let f = eval(&x);
                consider(&mut incumbent, &x, f);
                population.push((x, f));
            }
            trace
                .best_per_iteration
                .push(incumbent.as_ref().map_or(f64::NEG_INFINITY, |b| b.1));
        }
    }

    let (mut x, mut f) = incumbent?;
    let mut passes = Vec::new();
    refine(bounds, config, &mut x, &mut f, &mut eval, &mut passes);
    trace.best_per_iteration.extend(passes);
    trace.evaluations = evaluations;
    Some(SearchResult {
        best: x,
        value: f,
        trace,
    })
}

/// Regular grid with the largest per-dimension level count `L ≥ 2` such that
/// `L^dim ≤ budget`, endpoints included. Empty when even `2^dim` exceeds the
/// budget.
fn lattice(bounds: &BoxBounds, budget: usize) -> Vec<Vec<f64>> {
    let dim = bounds.dim() as u32;
    let fits = |l: usize| l.checked_pow(dim).is_some_and(|n| n <= budget);
    if !fits(2) {
        return Vec::new();
    }
    let mut levels = 2;
    while fits(levels + 1) {
        levels += 1;
    }
    let total = levels.pow(dim);
    (0..total)
        .map(|code| {
            (0..dim as usize)
                .map(|i| {
                    let k = (code / levels.pow(i as u32)) % levels;
                    bounds.lower()[i] + bounds.span(i) * k as f64 / (levels - 1) as f64
                })
                .collect()
        })
        .collect()
}

fn elite_moments(elites: &[(Vec<f64>, f64)], bounds: &BoxBounds, min_std_fraction: f64) -> (Vec<f64>, Vec<f64>) {
    let dim = bounds.dim();
    let n = elites.len() as f64;
    let mut mean = vec![0.0; dim];
    for (x, _) in elites {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; dim];
    for (x, _) in elites {
        for (s, (v, m)) in std.iter_mut().zip(x.iter().zip(&mean)) {
            *s += (v - m).powi(2) / n;
        }
    }
    for (i, s) in std.iter_mut().enumerate() {
        *s = s.sqrt().max(min_std_fraction * bounds.span(i));
    }
    (mean, std)
}

/// Coordinate-wise refinement. For each coordinate, probe ±h, fit a
/// parabola, and try its vertex (or a gradient-signed step when the probe is
/// not concave) as well as both bounds. Only improvements are accepted, so
/// `f` never decreases.
fn refine(
    bounds: &BoxBounds,
    config: &OptimizerConfig,
    x: &mut [f64],
    f: &mut f64,
    eval: &mut dyn FnMut(&[f64]) -> f64,
    pass_log: &mut Vec<f64>,
) {
    let dim = bounds.dim();
    let mut step: Vec<f64> = (0..dim).map(|i| 0.1 * bounds.span(i)).collect();
    let mut probe = x.to_vec();
    for _ in 0..config.refinement_steps {
        let start = *f;
        for i in 0..dim {
            let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
            let h = 1e-4 * bounds.span(i);
            let xi = x[i];
            let xp = (xi + h).min(hi);
            let xm = (xi - h).max(lo);
            if xp <= xm {
                continue;
            }
            probe.copy_from_slice(x);
            probe[i] = xp;
            let fp = eval(&probe);
            probe[i] = xm;
            let fm = eval(&probe);

            let g = (fp - fm) / (xp - xm);
            let interior = xp - xi > 0.0 && xi - xm > 0.0;
            let curvature = if interior {
                ((fp - *f) / (xp - xi) - (*f - fm) / (xi - xm)) / (0.5 * (xp - xm))
            } else {
                0.0
            };
            let mut delta = if curvature < 0.0 && curvature.is_finite() {
                -g / curvature
            } else {
                g.signum() * step[i]
            };
            if !delta.is_finite() {
                delta = 0.0;
            }
            delta = delta.clamp(-step[i] * 4.0, step[i] * 4.0);

            let mut best_local = (xi, *f);
            for (xc, fc) in [(xp, fp), (xm, fm)] {
                if fc > best_local.1 {
                    best_local = (xc, fc);
                }
            }
            if delta != 0.0 {
                let xc = (xi + delta).clamp(lo, hi);
                probe[i] = xc;
                let fc = eval(&probe);
                if fc > best_local.1 {
                    best_local = (xc, fc);
                    step[i] = (step[i] * 1.5).min(bounds.span(i));
                } else {
                    step[i] *= 0.5;
                }
            }
            for xc in [lo, hi] {
                if xc != xi {
                    probe[i] = xc;
                    let fc = eval(&probe);
                    if fc > best_local.1 {
                        best_local = (xc, fc);
                    }
                }
            }
            if best_local.1 > *f {
                x[i] = best_local.0;
                *f = best_local.1;
            }
        }
        pass_log.push(*f);
        if *f - start < config.convergence_tolerance {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn finds_interior_maximum_of_concave_quadratic() {
        let b = BoxBounds::new(&[(-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        let target = [0.3, -1.1, 1.7];
        let cfg = OptimizerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = maximize(&b, &[], &cfg, &mut rng, |x| {
            -x.iter().zip(&target).map(|(a, t)| (a - t).powi(2)).sum::<f64>()
        })
        .unwrap();
        for (a, t) in r.best.iter().zip(&target) {
            assert!((a - t).abs() < 1e-4, "{a} vs {t}");
        }
        assert!(r.trace.best_per_iteration.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.value >= r.trace.initial_best);
    }

    #[test]
    fn finds_corner_maximum() {
        let b = BoxBounds::new(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = maximize(&b, &[], &OptimizerConfig::default(), &mut rng, |x| x[0] - x[1]).unwrap();
        assert_eq!(r.best, vec![1.0, -1.0]);
    }

    #[test]
    fn lattice_fits_the_budget() {
        let b = BoxBounds::new(&[(-2.0, 2.0), (0.0, 1.0)]).unwrap();
        let g = lattice(&b, 32);
        assert_eq!(g.len(), 25);
        assert!(g.contains(&vec![-1.0, 0.25]) && g.contains(&vec![2.0, 1.0]));
        assert_eq!(lattice(&b, 3), Vec::<Vec<f64>>::new());
        assert_eq!(lattice(&b.repeat(15), 32).len(), 0);
    }

    #[test]
    fn all_failures_yield_none() {
        let b = BoxBounds::new(&[(-1.0, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(maximize(&b, &[], &OptimizerConfig::default(), &mut rng, |_| f64::NAN).is_none());
    }

    #[test]
    fn seeds_are_evaluated_first() {
        let b = BoxBounds::new(&[(-1.0, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = maximize(
            &b,
            &[vec![0.5], vec![5.0]],
            &OptimizerConfig::default(),
            &mut rng,
            |x| -x[0].abs(),
        )
        .unwrap();
        assert_eq!(r.trace.seed_values, vec![-0.5, -1.0]);
        assert!(r.best[0].abs() < 1e-6);
    }
}
