use super::*;
use crate::dynamics::SystemsFile;
use crate::gp::{Dataset, Hyperparameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pendulum_hypers() -> Vec<Hyperparameters> {
    vec![Hyperparameters::new(1.0, vec![1.0, 2.0, 1.0], 0.05).unwrap(); 2]
}

fn bounds1() -> ControlBounds {
    BoxBounds::new(&[(-1.5, 1.5)]).unwrap()
}

/// GP with data only at negative controls around the origin.
fn lopsided_model() -> GpModel {
    let mut ds = Dataset::new(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let z = [
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-1.5..0.0),
        ];
        ds.push(&z, &[z[0] + 0.05 * z[1], z[1] + 0.1 * z[2]]).unwrap();
    }
    GpModel::fit(ds, pendulum_hypers()).unwrap()
}

fn pendulum_model(n: usize, seed: u64) -> GpModel {
    let sys = SystemsFile::default_file().unwrap().build("pendulum").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::new(3, 2);
    for _ in 0..n {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0)];
        let u = [rng.random_range(-1.5..1.5)];
        let next = sys.true_step(&x, &u).unwrap();
        ds.push(&[x[0], x[1], u[0]], &next).unwrap();
    }
    let h = vec![
        Hyperparameters::new(1.0, vec![1.5, 3.0, 3.0], 1e-4).unwrap(),
        Hyperparameters::new(4.0, vec![1.5, 3.0, 3.0], 1e-4).unwrap(),
    ];
    GpModel::fit(ds, h).unwrap()
}

#[test]
fn prior_rollout_is_zero_after_start() {
    let m = GpModel::prior(3, pendulum_hypers()).unwrap();
    let c = ControlSequence::from_rows(&[vec![1.0], vec![-1.0], vec![0.2]], &bounds1()).unwrap();
    let s = mean_rollout(&m, &[0.7, -0.3], &c).unwrap();
    assert_eq!(s.nrows(), 4);
    assert_eq!(s.row(0).iter().copied().collect::<Vec<_>>(), vec![0.7, -0.3]);
    assert!(s.rows(1, 3).iter().all(|v| *v == 0.0));
}

#[test]
fn rollout_is_composition_of_predictions() {
    let m = lopsided_model();
    let c = ControlSequence::from_rows(&[vec![0.4], vec![-1.2], vec![1.1]], &bounds1()).unwrap();
    let s = mean_rollout(&m, &[0.1, 0.2], &c).unwrap();
    let mut x = vec![0.1, 0.2];
    for (i, u) in c.iter().enumerate() {
        x = m.predict(&[x[0], x[1], u[0]]).unwrap().mean;
        assert_eq!(s.row(i + 1).iter().copied().collect::<Vec<_>>(), x);
    }
}

#[test]
fn objective_composition_and_penalty_linearity() {
    let m = lopsided_model();
    let x0 = [0.1, -0.2];
    let one = ControlSequence::from_rows(&[vec![0.3]], &bounds1()).unwrap();
    let h0 = m.entropy(&[0.1, -0.2, 0.3]).unwrap();
    assert_eq!(entropy_objective(&m, &x0, &one, 0.0).unwrap(), h0);

    let two = ControlSequence::from_rows(&[vec![0.3], vec![-0.9]], &bounds1()).unwrap();
    let x1 = m.predict(&[0.1, -0.2, 0.3]).unwrap().mean;
    let h1 = m.entropy(&[x1[0], x1[1], -0.9]).unwrap();
    let v = entropy_objective(&m, &x0, &two, 0.0).unwrap();
    assert!((v - (h0 + h1)).abs() < 1e-12);

    let w = 0.07;
    let a = entropy_objective(&m, &x0, &two, w).unwrap();
    let b = entropy_objective(&m, &x0, &two, 2.0 * w).unwrap();
    assert!((a - b - w * two.squared_norm()).abs() < 1e-12);
}

#[test]
fn planning_rejects_bad_shapes() {
    let m = lopsided_model();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = OptimizerConfig::default();
    assert!(optimize_entropy(&m, &[0.0], 3, &bounds1(), &cfg, &mut rng, None).is_err());
    assert!(optimize_entropy(&m, &[0.0, 0.0], 0, &bounds1(), &cfg, &mut rng, None).is_err());
    let bad = OptimizerConfig {
        elite_fraction: 0.01,
        ..cfg
    };
    assert!(optimize_entropy(&m, &[0.0, 0.0], 3, &bounds1(), &bad, &mut rng, None).is_err());
}

#[test]
fn one_step_optimum_beats_control_grid() {
    let m = lopsided_model();
    let cfg = OptimizerConfig::default();
    let b = bounds1();
    let w = cfg.penalty_weight(&b);
    let x0 = [0.0, 0.0];
    let grid_best = [-1.5, 0.0, 1.5]
        .iter()
        .map(|&u| entropy_objective(&m, &x0, &ControlSequence::from_rows(&[vec![u]], &b).unwrap(), w).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let out = optimize_entropy(&m, &x0, 1, &b, &cfg, &mut rng, None).unwrap();
    assert!(out.plan.objective_value >= grid_best - 1e-12);
    // data sits at negative controls, so the informative push is positive
    assert!((out.plan.controls.row(0)[0] - 1.5).abs() < 1e-9);
}

#[test]
fn plan_invariants_hold() {
    let m = lopsided_model();
    let cfg = OptimizerConfig::default();
    let b = bounds1();
    let x0 = [0.2, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let out = optimize_entropy(&m, &x0, 5, &b, &cfg, &mut rng, None).unwrap();
    let plan = &out.plan;
    assert_eq!(plan.controls.len(), 5);
    assert!(plan.controls.iter().all(|u| b.contains(u)));
    assert_eq!(
        plan.predicted_states.row(0).iter().copied().collect::<Vec<_>>(),
        x0.to_vec()
    );
    let re = entropy_objective(&m, &x0, &plan.controls, cfg.penalty_weight(&b)).unwrap();
    assert!((re - plan.objective_value).abs() <= 1e-10);
    assert!(plan.objective_value >= out.trace.initial_best);
    assert!(out.trace.best_per_iteration.windows(2).all(|w| w[1] >= w[0]));

    let mut rng2 = ChaCha8Rng::seed_from_u64(7);
    let again = optimize_entropy(&m, &x0, 5, &b, &cfg, &mut rng2, None).unwrap();
    assert_eq!(again, out);
}

#[test]
fn flat_entropy_prefers_zero_controls() {
    let m = GpModel::prior(3, pendulum_hypers()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let out = optimize_entropy(
        &m,
        &[0.0, 0.0],
        4,
        &bounds1(),
        &OptimizerConfig::default(),
        &mut rng,
        None,
    )
    .unwrap();
    assert!(out.plan.controls.squared_norm() < 1e-12);
}

#[test]
fn warm_start_is_injected() {
    let m = lopsided_model();
    let b = bounds1();
    let warm = ControlSequence::from_rows(&[vec![0.5], vec![0.5]], &b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let out = optimize_entropy(
        &m,
        &[0.0, 0.0],
        3,
        &b,
        &OptimizerConfig::default(),
        &mut rng,
        Some(&warm),
    )
    .unwrap();
    let padded = ControlSequence::from_rows(&[vec![0.5], vec![0.5], vec![0.5]], &b).unwrap();
    let expected = entropy_objective(&m, &[0.0, 0.0], &padded, OptimizerConfig::default().penalty_weight(&b)).unwrap();
    assert_eq!(out.trace.seed_values.len(), 2);
    assert_eq!(out.trace.seed_values[1], expected);
}

#[test]
fn goal_at_fixed_point_needs_no_control() {
    // x' = x + 0.05 u around the origin: zero control keeps x0 fixed
    let mut ds = Dataset::new(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..40 {
        let z = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.5..1.5),
        ];
        ds.push(&z, &[z[0] + 0.05 * z[2], z[1]]).unwrap();
    }
    let h = vec![Hyperparameters::new(1.0, vec![2.0, 2.0, 2.0], 1e-6).unwrap(); 2];
    let m = GpModel::fit(ds, h).unwrap();
    let region = BoxBounds::new(&[(-3.0, 3.0), (-8.0, 8.0)]).unwrap();
    let b = bounds1();
    let cfg = OptimizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = optimize_goal(&m, &[0.0, 0.0], &[0.0, 0.0], 3, &b, &region, &cfg, &mut rng).unwrap();
    let cost = goal_cost(
        &m,
        &[0.0, 0.0],
        &[0.0, 0.0],
        &region,
        &out.plan.controls,
        cfg.penalty_weight(&b),
    )
    .unwrap();
    assert!(cost < 1e-6, "cost {cost}");
    assert!(out.plan.controls.iter().all(|u| u[0].abs() < 0.05));
}

#[test]
fn goal_plan_is_no_worse_than_zero_controls() {
    let m = lopsided_model();
    let region = BoxBounds::new(&[(-3.0, 3.0), (-8.0, 8.0)]).unwrap();
    let b = bounds1();
    let cfg = OptimizerConfig::default();
    let goal = [0.4, -0.3];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let out = optimize_goal(&m, &[0.0, 0.0], &goal, 4, &b, &region, &cfg, &mut rng).unwrap();
    let w = cfg.penalty_weight(&b);
    let zero = ControlSequence::constant(&[0.0], 4, &b).unwrap();
    let plan_cost = goal_cost(&m, &[0.0, 0.0], &goal, &region, &out.plan.controls, w).unwrap();
    assert!(plan_cost <= goal_cost(&m, &[0.0, 0.0], &goal, &region, &zero, w).unwrap());
    assert!((plan_cost + out.plan.objective_value).abs() < 1e-12);
}

#[test]
fn reachable_one_step_goal_is_reached() {
    let m = pendulum_model(250, 11);
    let sys = SystemsFile::default_file().unwrap().build("pendulum").unwrap();
    let region = sys.spec().region_of_interest.clone();
    let b = sys.spec().control_bounds.clone();
    let x0 = [0.3, 1.0];
    let goal = sys.true_step(&x0, &[1.1]).unwrap();
    let cfg = OptimizerConfig::default();
    let w = cfg.penalty_weight(&b);

    // dense grid oracle over the single control
    let grid_best = (0..=300)
        .map(|i| -1.5 + 3.0 * i as f64 / 300.0)
        .map(|u| {
            goal_cost(
                &m,
                &x0,
                &goal,
                &region,
                &ControlSequence::from_rows(&[vec![u]], &b).unwrap(),
                w,
            )
            .unwrap()
        })
        .fold(f64::INFINITY, f64::min);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let out = optimize_goal(&m, &x0, &goal, 1, &b, &region, &cfg, &mut rng).unwrap();
    let cost = -out.plan.objective_value;
    assert!(cost <= grid_best + 1e-9, "{cost} vs grid {grid_best}");
    let end = out.plan.predicted_states.row(1);
    let dist: f64 = (0..2)
        .map(|j| ((end[j] - goal[j]) / region.span(j)).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(dist < 0.1, "normalized distance {dist}");
}

#[test]
fn entropy_point_search_is_best_so_far() {
    let m = lopsided_model();
    let region = BoxBounds::new(&[(-3.0, 3.0), (-8.0, 8.0), (-1.5, 1.5)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (z, h, trace) = maximize_entropy_point(&m, &region, &OptimizerConfig::default(), &mut rng).unwrap();
    assert!(region.contains(&z));
    assert!(h >= trace.initial_best);
    assert_eq!(m.entropy(&z).unwrap(), h);
}
