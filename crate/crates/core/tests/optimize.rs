use std::f64::consts::PI;
use std::sync::OnceLock;

use liftgait::connection::ShapeGrid;
use liftgait::gait::{Gait, COEFFS_PER_JOINT, PERIOD_INDEX};
use liftgait::linkage::{Direction, Shape, SystemModel};
use liftgait::optimize::*;
use liftgait::simulate::average_effort;
use nalgebra::Vector3;

fn swimmer() -> &'static ShapeGrid {
    static G: OnceLock<ShapeGrid> = OnceLock::new();
    G.get_or_init(|| ShapeGrid::new(&SystemModel::swimmer()).unwrap())
}

fn snake() -> &'static ShapeGrid {
    static G: OnceLock<ShapeGrid> = OnceLock::new();
    G.get_or_init(|| ShapeGrid::new(&SystemModel::snake()).unwrap())
}

fn swimmer_optimum() -> &'static Solution {
    static S: OnceLock<Solution> = OnceLock::new();
    S.get_or_init(|| {
        let initial = default_initial_gait(swimmer(), Direction::X).unwrap();
        kinematic_solution(swimmer(), Direction::X, SolverSettings::default(), initial).unwrap()
    })
}

fn snake_optimum() -> &'static Solution {
    static S: OnceLock<Solution> = OnceLock::new();
    S.get_or_init(|| {
        let initial = default_initial_gait(snake(), Direction::Theta).unwrap();
        kinematic_solution(snake(), Direction::Theta, SolverSettings::default(), initial).unwrap()
    })
}

fn snake_crossover() -> f64 {
    static L: OnceLock<f64> = OnceLock::new();
    *L.get_or_init(|| crossover_momentum(snake(), Direction::Theta, &snake_optimum().gait, 400).unwrap())
}

fn wobble(center: Shape) -> Gait {
    let mut g = Gait::circle(center, 0.3, 1.5).unwrap();
    g.joints[0][2] = 0.12;
    g.joints[1][3] = -0.07;
    g
}

#[test]
fn swimmer_kinematic_optimum_is_centered_and_constrained() {
    let s = swimmer_optimum();
    let c = s.gait.center();
    assert!(c.alpha1.abs() < 1e-9 && c.alpha2.abs() < 1e-9, "{c:?}");
    assert!(s.velocity > 0.0);
    assert!((0.98..=1.0 + 1e-9).contains(&s.outcome.effort), "{}", s.outcome.effort);
}

#[test]
fn snake_kinematic_optimum_is_constrained() {
    let s = snake_optimum();
    assert!(s.velocity > 0.0);
    assert!((0.98..=1.0 + 1e-9).contains(&s.outcome.effort), "{}", s.outcome.effort);
}

#[test]
fn rerunning_from_the_optimum_is_a_fixed_point() {
    let s = swimmer_optimum();
    let again = solve(&Problem::new(swimmer(), Direction::X, 0.0, s.gait).unwrap()).unwrap();
    assert!((again.velocity - s.velocity).abs() < 1e-6, "{} {}", again.velocity, s.velocity);
}

#[test]
fn solve_is_deterministic() {
    let initial = wobble(Shape::new(0.0, 0.0));
    let problem = Problem::new(swimmer(), Direction::X, 0.2, initial).unwrap();
    let a = solve(&problem).unwrap();
    let b = solve(&problem).unwrap();
    assert_eq!(a.gait, b.gait);
    assert_eq!(a.velocity.to_bits(), b.velocity.to_bits());
}

#[test]
fn optimum_gradient_matches_finite_differences() {
    let s = swimmer_optimum();
    let problem = Problem::new(swimmer(), Direction::X, 0.0, s.gait).unwrap();
    let geo = objective_gradient(&problem, &s.gait).unwrap();
    let fd = finite_difference_gradient(&problem, &s.gait).unwrap();
    assert!(geo.dot(&fd) / (geo.norm() * fd.norm()) > 0.99);
}

#[test]
fn infeasible_start_is_repaired() {
    let fast = Gait::circle(Shape::new(0.0, 0.0), 1.0, 0.2).unwrap();
    let problem = Problem::new(swimmer(), Direction::X, 0.0, fast).unwrap();
    assert!(problem.evaluate(&fast).unwrap().1 > 1.0);
    let s = solve(&problem).unwrap();
    assert!(s.outcome.effort <= 1.0 + 1e-3);
}

#[test]
fn snake_at_large_momentum_holds_the_folded_shape() {
    let l = 8.0 * snake_crossover();
    let problem = Problem::new(snake(), Direction::Theta, l, snake_optimum().gait).unwrap();
    let s = solve(&problem).unwrap();
    let held = Gait::point(Shape::new(PI, PI), 1.0).unwrap();
    let problem = Problem::new(snake(), Direction::Theta, l, held).unwrap();
    let from_point = solve(&problem).unwrap();
    let best = if from_point.velocity > s.velocity { from_point } else { s };
    assert!(best.gait.amplitude() < 0.05, "{}", best.gait.amplitude());
    assert!(best.gait.center().torus_distance(Shape::new(PI, PI)) < 0.1);
}

#[test]
fn y_direction_is_rejected() {
    let g = wobble(Shape::new(0.0, 0.0));
    assert!(Problem::new(swimmer(), Direction::Y, 0.0, g).is_err());
}

#[test]
fn settings_reject_misaligned_steps() {
    let s = SolverSettings { steps: 300, ..SolverSettings::default() };
    assert!(s.validate().is_err());
    let json = r#"{"max_iterations": 10, "bogus": 1}"#;
    assert!(serde_json::from_str::<SolverSettings>(json).is_err());
}

#[test]
fn point_gait_has_zero_effort_gradient_in_coefficients() {
    let g = Gait::point(Shape::new(0.4, -0.2), 2.0).unwrap();
    let problem = Problem::new(swimmer(), Direction::X, 0.0, g).unwrap();
    let grad = effort_gradient(&problem, &g).unwrap();
    for j in 0..PERIOD_INDEX {
        assert!(grad[j].abs() < 1e-8, "{j}: {}", grad[j]);
    }
}

#[test]
fn effort_gradient_survives_quadrature_refinement() {
    let g = wobble(Shape::new(0.2, 0.1));
    let coarse = Problem::new(swimmer(), Direction::X, 0.3, g).unwrap();
    let fine = coarse.with_settings(SolverSettings { steps: 800, ..SolverSettings::default() }).unwrap();
    let a = effort_gradient(&coarse, &g).unwrap();
    let b = effort_gradient(&fine, &g).unwrap();
    assert!((a - b).norm() < 1e-4 * b.norm(), "{}", (a - b).norm() / b.norm());
}

#[test]
fn effort_gradient_respects_the_swimmer_mirror() {
    let g = wobble(Shape::new(0.2, -0.3));
    let problem = Problem::new(swimmer(), Direction::X, 0.0, g).unwrap();
    let a = effort_gradient(&problem, &g).unwrap();
    let b = effort_gradient(&problem, &g.swapped()).unwrap();
    let n = COEFFS_PER_JOINT;
    for k in 0..n {
        assert!((a[k] - b[n + k]).abs() < 1e-6 * a.norm());
        assert!((a[n + k] - b[k]).abs() < 1e-6 * a.norm());
    }
    assert!((a[PERIOD_INDEX] - b[PERIOD_INDEX]).abs() < 1e-6 * a.norm());
}

#[test]
fn kinematic_displacement_has_no_period_gradient() {
    let g = wobble(Shape::new(0.2, -0.3));
    let problem = Problem::new(swimmer(), Direction::X, 0.0, g).unwrap();
    let d = displacement_gradient(&problem, &g).unwrap();
    assert!(d.jacobian.column(PERIOD_INDEX).norm() < 1e-12);
}

#[test]
fn baselines_at_zero_momentum() {
    let s = snake_optimum();
    let kin = baseline_kinematic(snake(), Direction::Theta, 0.0, &s.gait, 400).unwrap();
    assert_eq!(kin, s.velocity);
    assert_eq!(baseline_momentum(snake(), Direction::Theta, 0.0), 0.0);
}

#[test]
fn momentum_baseline_is_linear() {
    let a = baseline_momentum(snake(), Direction::Theta, 0.3);
    let b = baseline_momentum(snake(), Direction::Theta, 0.9);
    assert!((b - 3.0 * a).abs() < 1e-12 * b.abs());
}

#[test]
fn momentum_baseline_overtakes_at_the_crossover() {
    let l = snake_crossover();
    let gait = snake_optimum().gait;
    let gap = |m: f64| baseline_momentum(snake(), Direction::Theta, m) - baseline_kinematic(snake(), Direction::Theta, m, &gait, 400).unwrap();
    assert!(gap(0.99 * l) < 0.0 && gap(1.01 * l) > 0.0);
}

#[test]
fn sweep_starts_at_the_standalone_solve_and_is_deterministic() {
    let levels = [0.0, 0.5 * snake_crossover()];
    let a = sweep_from(snake(), Direction::Theta, &levels, SolverSettings::default(), snake_optimum()).unwrap();
    assert_eq!(a.levels[0].velocity, snake_optimum().velocity);
    assert_eq!(a.levels[0].gait, Some(snake_optimum().gait));
    let l1 = &a.levels[1];
    assert!(l1.velocity >= l1.kinematic_velocity.max(l1.momentum_velocity) * 0.99);
    assert!(l1.effort <= 1.0 + 1e-3);
    let b = sweep_from(snake(), Direction::Theta, &levels, SolverSettings::default(), snake_optimum()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn sweep_rejects_unsorted_levels() {
    let g = wobble(Shape::new(0.0, 0.0));
    assert!(sweep(swimmer(), Direction::X, &[0.0, 0.2, 0.1], SolverSettings::default(), g).is_err());
    assert!(sweep(swimmer(), Direction::X, &[0.1, 0.2], SolverSettings::default(), g).is_err());
}

#[test]
fn linear_levels_span_the_range() {
    assert_eq!(linear_levels(3.0, 4), vec![0.0, 1.0, 2.0, 3.0]);
}

#[test]
fn circle_sweep_shapes() {
    let l = snake_crossover();
    let radii: Vec<f64> = (0..15).map(|k| 0.2 * k as f64).collect();
    let cs = circle_sweep(snake(), &radii, &[0.0, l], 1.0, 400).unwrap();
    // R = 0 holds the folded shape: no shape-driven turning, strongest drift.
    let zero = &cs.rows[1][0];
    assert_eq!(zero.kinematic, 0.0);
    assert!(cs.rows[1].iter().all(|p| p.momentum_per_unit <= zero.momentum_per_unit + 1e-12));
    let kinematic = local_maxima(&cs.rows[0]);
    let interior: Vec<_> = kinematic.iter().filter(|&&i| i > 0 && i + 1 < radii.len()).collect();
    assert_eq!(interior.len(), 1, "{kinematic:?}");
    assert_eq!(local_maxima(&cs.rows[1]).len(), 2);
}

#[test]
fn tangent_circle_passes_through_the_folded_shape() {
    let g = tangent_circle(0.7, 1.0, false).unwrap();
    let nearest = (0..200)
        .map(|k| g.evaluate(k as f64 / 200.0).0.torus_distance(Shape::new(PI, PI)))
        .fold(f64::INFINITY, f64::min);
    assert!(nearest < 1e-3);
}

#[test]
fn flux_estimate_vanishes_for_a_point() {
    let g = Gait::point(Shape::new(0.3, 0.3), 1.0).unwrap();
    assert_eq!(flux_estimate(swimmer(), &g), Vector3::zeros());
}

#[test]
fn effort_is_scale_consistent() {
    // halving the pace of a gait cuts the effort
    let g = wobble(Shape::new(0.0, 0.0));
    let e1 = average_effort(swimmer(), &g, &Vector3::zeros(), 400).unwrap();
    let e2 = average_effort(swimmer(), &g.with_period(2.0 * g.period).unwrap(), &Vector3::zeros(), 400).unwrap();
    assert!(e2 < e1);
}

#[test]
fn sweep_outputs_round_trip_through_json() {
    // unreached levels carry NaN, written as null
    let levels = [0.0, 0.5 * snake_crossover()];
    let mut a = sweep_from(snake(), Direction::Theta, &levels, SolverSettings::default(), snake_optimum()).unwrap();
    a.levels[1].velocity = f64::NAN;
    let text = serde_json::to_string(&a).unwrap();
    assert!(text.contains("null"));
    let back: SweepResult = serde_json::from_str(&text).unwrap();
    assert!(back.levels[1].velocity.is_nan());
    assert_eq!(serde_json::to_string(&back).unwrap(), text);

    let cs = circle_sweep(snake(), &[0.0, 0.5, 50.0], &[0.01], 1.0, 400).unwrap();
    let text = serde_json::to_string(&cs).unwrap();
    let back: CircleSweep = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}
