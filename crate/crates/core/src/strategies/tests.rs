use super::*;
use crate::dynamics::SystemsFile;
use crate::gp::{Dataset, Hyperparameters};
use crate::trajopt::optimize_entropy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bounds1() -> ControlBounds {
    BoxBounds::new(&[(-1.5, 1.5)]).unwrap()
}

fn region() -> BoxBounds {
    BoxBounds::new(&[(-PI, PI), (-8.0, 8.0)]).unwrap()
}

fn hypers() -> Vec<Hyperparameters> {
    vec![Hyperparameters::new(1.0, vec![0.8, 2.0, 1.0], 0.01).unwrap(); 2]
}

fn fitted_model(n: usize, seed: u64) -> GpModel {
    let sys = SystemsFile::default_file().unwrap().build("pendulum").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::new(3, 2);
    for _ in 0..n {
        let x = [rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)];
        let u = [rng.random_range(-1.5..1.5)];
        let next = sys.true_step(&x, &u).unwrap();
        ds.push(&[x[0], x[1], u[0]], &next).unwrap();
    }
    GpModel::fit(ds, hypers()).unwrap()
}

fn small_planner() -> OptimizerConfig {
    OptimizerConfig {
        population_size: 32,
        iterations: 8,
        ..OptimizerConfig::default()
    }
}

fn context(horizon: usize) -> StrategyContext {
    StrategyContext {
        bounds: bounds1(),
        region: region(),
        horizon,
        dt: 0.05,
        total_steps: 60,
    }
}

#[test]
fn names_round_trip() {
    for k in StrategyKind::ALL {
        assert_eq!(k.to_string().parse::<StrategyKind>().unwrap(), k);
        assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
    }
    assert_eq!(StrategyKind::Pa.name(), "pa");
    assert!("p&a".parse::<StrategyKind>().is_err());
    let mut sorted = StrategyKind::TABLE_ORDER.to_vec();
    sorted.sort();
    assert_eq!(sorted, StrategyKind::ALL.to_vec());
}

#[test]
fn prbs_is_binary_and_balanced() {
    let b = BoxBounds::new(&[(-1.0, 3.0), (-2.0, 2.0)]).unwrap();
    let mut s = PrbsState::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut high = [0usize; 2];
    let n = 10_000;
    for _ in 0..n {
        let u = prbs_next(&mut s, &b, 15, &mut rng);
        for j in 0..2 {
            assert!(u[j] == b.lower()[j] || u[j] == b.upper()[j]);
            high[j] += (u[j] == b.upper()[j]) as usize;
        }
    }
    for h in high {
        let f = h as f64 / n as f64;
        assert!((0.4..=0.6).contains(&f), "level frequency {f}");
    }
}

#[test]
fn prbs_holds_stay_within_limit() {
    let b = bounds1();
    let mut s = PrbsState::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seq: Vec<f64> = (0..2000).map(|_| prbs_next(&mut s, &b, 4, &mut rng)[0]).collect();
    let mut run = 1;
    let mut longest = 1;
    let mut switches = 0;
    for w in seq.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            switches += 1;
            run = 1;
        }
        longest = longest.max(run);
    }
    assert!(longest <= 4);
    // mean hold 2.5 steps
    assert!(switches > 600 && switches < 1000, "{switches}");
}

#[test]
fn prbs_is_deterministic() {
    let run = || {
        let mut s = PrbsState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        (0..100)
            .map(|_| prbs_next(&mut s, &bounds1(), 10, &mut rng)[0])
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn chirp_starts_at_center_and_stays_bounded() {
    let b = BoxBounds::new(&[(-1.0, 3.0), (-2.0, 2.0)]).unwrap();
    let p = ChirpParams::default();
    assert_eq!(chirp_next(0, &b, 0.05, 150, &p), vec![1.0, 0.0]);
    for k in 0..150 {
        let u = chirp_next(k, &b, 0.05, 150, &p);
        assert!(b.contains(&u));
        // odd dimensions mirror even ones
        assert!(((u[0] - 1.0) + u[1]).abs() < 1e-12);
    }
}

#[test]
fn chirp_zero_crossings_get_closer() {
    let b = bounds1();
    let p = ChirpParams::default();
    let dt = 0.01;
    let n = 3000;
    let u: Vec<f64> = (0..n).map(|k| chirp_next(k, &b, dt, n, &p)[0]).collect();
    // linear interpolation of sign changes
    let mut crossings = Vec::new();
    for k in 1..n {
        if u[k - 1] != 0.0 && u[k - 1].signum() != u[k].signum() {
            crossings.push((k - 1) as f64 + u[k - 1] / (u[k - 1] - u[k]));
        }
    }
    assert!(crossings.len() > 20);
    let gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "{} then {}", w[0], w[1]);
    }
}

#[test]
fn greedy_delegates_to_one_step_plan() {
    let m = fitted_model(20, 1);
    let x = [0.2, -0.3];
    let cfg = small_planner();
    let (u, status) = greedy_next(&m, &x, &bounds1(), &cfg, &mut ChaCha8Rng::seed_from_u64(3));
    let plan = optimize_entropy(&m, &x, 1, &bounds1(), &cfg, &mut ChaCha8Rng::seed_from_u64(3), None).unwrap();
    assert_eq!(status, PlannerStatus::Planned);
    assert_eq!(u, plan.plan.controls.row(0));
}

#[test]
fn greedy_on_empty_model_picks_zero() {
    let m = GpModel::prior(3, hypers()).unwrap();
    let (u, _) = greedy_next(
        &m,
        &[0.0, 0.0],
        &bounds1(),
        &small_planner(),
        &mut ChaCha8Rng::seed_from_u64(3),
    );
    assert_eq!(u, vec![0.0]);
}

#[test]
fn greedy_matches_control_grid_argmax() {
    let m = fitted_model(25, 2);
    let x = [0.1, 0.4];
    let cfg = OptimizerConfig {
        control_penalty_weight: 0.0,
        ..OptimizerConfig::default()
    };
    let (u, _) = greedy_next(&m, &x, &bounds1(), &cfg, &mut ChaCha8Rng::seed_from_u64(9));
    let h = |u: f64| m.entropy(&[x[0], x[1], u]).unwrap();
    let grid_best = (0..=3000)
        .map(|i| h(-1.5 + 3.0 * i as f64 / 3000.0))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(h(u[0]) >= grid_best - 1e-9, "{} vs {grid_best}", h(u[0]));
}

#[test]
fn rec_and_pa_reduce_to_greedy_at_unit_horizon() {
    let m = fitted_model(20, 6);
    let x = [-0.2, 0.5];
    let cfg = small_planner();
    let rng = || ChaCha8Rng::seed_from_u64(12);
    let (g, _) = greedy_next(&m, &x, &bounds1(), &cfg, &mut rng());
    let (r, plan, _) = rec_step(&m, &x, 1, &bounds1(), &cfg, &mut rng(), None);
    let (p, _) = pa_step(&m, &x, 1, &bounds1(), &cfg, &mut rng());
    assert_eq!(g, r);
    assert_eq!(vec![g], p);
    assert_eq!(plan.unwrap().row(0), r.as_slice());
}

#[test]
fn rec_returns_first_row_and_pa_the_whole_plan() {
    let m = fitted_model(20, 7);
    let x = [0.0, 0.1];
    let cfg = small_planner();
    let (u, plan, status) = rec_step(&m, &x, 5, &bounds1(), &cfg, &mut ChaCha8Rng::seed_from_u64(1), None);
    let plan = plan.unwrap();
    assert_eq!(status, PlannerStatus::Planned);
    assert_eq!(plan.len(), 5);
    assert_eq!(plan.row(0), u.as_slice());
    let (all, _) = pa_step(&m, &x, 5, &bounds1(), &cfg, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(all, plan.rows());
}

#[test]
fn sep_round_has_horizon_plus_one_admissible_controls() {
    for m in [GpModel::prior(3, hypers()).unwrap(), fitted_model(15, 3)] {
        let r = sep_step(
            &m,
            &[0.0, 0.0],
            6,
            &bounds1(),
            &region(),
            &small_planner(),
            &mut ChaCha8Rng::seed_from_u64(2),
        );
        assert_eq!(r.controls.len(), 7);
        assert!(r.controls.iter().all(|u| bounds1().contains(u)));
        let z = r.target.unwrap();
        assert!(region().product(&bounds1()).contains(&z));
        assert_eq!(r.controls[6], z[2..].to_vec());
    }
}

#[test]
fn sep_target_leaves_the_data_cluster() {
    // dense cluster around the origin; entropy is lowest there
    let mut ds = Dataset::new(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let z = [
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        ];
        ds.push(&z, &[z[0], z[1]]).unwrap();
    }
    let h = hypers();
    let m = GpModel::fit(ds, h.clone()).unwrap();
    let r = sep_step(
        &m,
        &[0.0, 0.0],
        5,
        &bounds1(),
        &region(),
        &small_planner(),
        &mut ChaCha8Rng::seed_from_u64(4),
    );
    let z = r.target.unwrap();
    let dist = z
        .iter()
        .zip(&h[0].lengthscales)
        .map(|(v, l)| (v / l).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(dist > 2.0, "target {z:?} at {dist} lengthscales");
}

#[test]
fn sep_target_search_is_best_so_far() {
    let m = fitted_model(15, 8);
    let (z, hz, trace) = maximize_entropy_point(
        &m,
        &region().product(&bounds1()),
        &small_planner(),
        &mut ChaCha8Rng::seed_from_u64(5),
    )
    .unwrap();
    assert!(hz >= trace.initial_best);
    assert_eq!(m.entropy(&z).unwrap(), hz);
}

fn run_explorer(kind: StrategyKind, seed: u64) -> (Vec<Vec<f64>>, Vec<PlannerStatus>, usize) {
    let model = fitted_model(12, 10);
    let mut ex = Explorer::new(kind, context(4), StrategyParams::default(), small_planner(), model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0, 0.0];
    let mut us = Vec::new();
    let mut statuses = Vec::new();
    for _ in 0..14 {
        let (u, s) = ex.next_control(&x, &mut rng);
        x = vec![x[0] + 0.05 * x[1], x[1] + 0.05 * u[0]];
        us.push(u);
        statuses.push(s);
    }
    (us, statuses, ex.state().step)
}

#[test]
fn explorers_are_deterministic_and_admissible() {
    for kind in StrategyKind::ALL {
        let (a, sa, steps) = run_explorer(kind, 3);
        let (b, sb, _) = run_explorer(kind, 3);
        assert_eq!(a, b, "{kind}");
        assert_eq!(sa, sb);
        assert_eq!(steps, 14);
        assert!(a.iter().all(|u| bounds1().contains(u)), "{kind}");
        let cold = sa.iter().filter(|s| **s == PlannerStatus::ColdStart).count();
        if kind.is_model_based() {
            assert_eq!(cold, 5, "{kind}");
            assert!(sa[5..].iter().all(|s| *s != PlannerStatus::ColdStart));
        } else {
            assert!(sa.iter().all(|s| *s == PlannerStatus::OpenLoop));
        }
    }
}

#[test]
fn batch_strategies_queue_their_rounds() {
    let (_, s, _) = run_explorer(StrategyKind::Pa, 1);
    // cold start, then rounds of four
    assert_eq!(
        &s[5..9],
        &[
            PlannerStatus::Planned,
            PlannerStatus::Queued,
            PlannerStatus::Queued,
            PlannerStatus::Queued
        ]
    );
    assert_eq!(s[9], PlannerStatus::Planned);
    let (_, s, _) = run_explorer(StrategyKind::Sep, 1);
    assert_eq!(s[5], PlannerStatus::Planned);
    assert!(s[6..10].iter().all(|s| *s == PlannerStatus::Queued));
    assert_eq!(s[10], PlannerStatus::Planned);
}

#[test]
fn explorer_rejects_mismatched_model() {
    let m = GpModel::prior(4, vec![Hyperparameters::new(1.0, vec![1.0; 4], 0.01).unwrap(); 2]).unwrap();
    assert!(Explorer::new(
        StrategyKind::Rec,
        context(3),
        StrategyParams::default(),
        small_planner(),
        m
    )
    .is_err());
}
