use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use staf_core::dynamics::{
    accumulate_cost, hjb_residual, optimal_policy_from_gradient, pseudo_inverse, regulation_benchmark,
    running_cost, tracking_transform, ControlAffine, CostSpec, TrackingProblem,
};
use staf_core::sysid::{benchmark_theta, LinearDriftModel};
use staf_core::StafError;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn tracking_plant() -> LinearDriftModel {
    LinearDriftModel::new(benchmark_theta()).unwrap()
}

#[test]
fn benchmark_closed_forms() {
    let (plant, _, sol) = regulation_benchmark();
    assert_eq!((sol.value)(&v(&[-1.0, 1.0])), 1.5);
    assert_eq!((sol.policy)(&v(&[0.0, 1.0]))[0], -3.0);
    assert_eq!(plant.drift(&v(&[0.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
    assert_eq!(plant.effectiveness(&v(&[0.0, 0.0])).unwrap(), DMatrix::from_column_slice(2, 1, &[0.0, 3.0]));
}

#[test]
fn analytic_solution_satisfies_hjb_on_a_grid_of_samples() {
    let (plant, cost, sol) = regulation_benchmark();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let x = v(&[rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0)]);
        let res = hjb_residual(&plant, &cost, sol.value_gradient, &x).unwrap();
        assert!(res.abs() <= 1e-10, "residual {res} at {x}");
    }
}

#[test]
fn zero_value_leaves_only_state_cost() {
    let (plant, cost, _) = regulation_benchmark();
    let res = hjb_residual(&plant, &cost, |_| DVector::zeros(2), &v(&[1.0, 1.0])).unwrap();
    assert_eq!(res, 2.0);
}

#[test]
fn wrong_value_residual_matches_hand_evaluation() {
    // V = x1² + x2² at [1, 0]: ∇V = [2, 0], f = [-1, -0.5], gᵀ∇Vᵀ = 0, Q = 1.
    // Residual = 0 + (2·(-1) + 0·(-0.5)) + 1 = -1.
    let (plant, cost, _) = regulation_benchmark();
    let res = hjb_residual(&plant, &cost, |x| x * 2.0, &v(&[1.0, 0.0])).unwrap();
    assert_relative_eq!(res, -1.0, epsilon = 1e-12);
}

#[test]
fn policy_from_gradient_examples() {
    let (plant, cost, _) = regulation_benchmark();
    let u = optimal_policy_from_gradient(&plant, &cost, &v(&[0.0, 2.0]), &v(&[0.0, 1.0])).unwrap();
    assert_relative_eq!(u[0], -3.0, epsilon = 1e-15);
    let u = optimal_policy_from_gradient(&plant, &cost, &v(&[0.0, 0.0]), &v(&[0.3, -0.4])).unwrap();
    assert_eq!(u[0], 0.0);
    let u = optimal_policy_from_gradient(&plant, &cost, &v(&[-1.0, 2.0]), &v(&[-1.0, 1.0])).unwrap();
    assert_relative_eq!(u[0], -1.5838531634528576, epsilon = 1e-12);
}

proptest! {
    #[test]
    fn policy_from_analytic_gradient_is_the_closed_form(x1 in -2.0..2.0f64, x2 in -2.0..2.0f64) {
        let (plant, cost, sol) = regulation_benchmark();
        let x = v(&[x1, x2]);
        let u = optimal_policy_from_gradient(&plant, &cost, &(sol.value_gradient)(&x), &x).unwrap();
        prop_assert!((u[0] - (sol.policy)(&x)[0]).abs() <= 1e-12);
    }

    #[test]
    fn running_cost_is_positive_off_the_origin(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64, u in -3.0..3.0f64) {
        let (_, cost, _) = regulation_benchmark();
        let r = running_cost(&cost, &v(&[x1, x2]), &v(&[u])).unwrap();
        prop_assert!(r >= 0.0);
        if x1 != 0.0 || x2 != 0.0 || u != 0.0 {
            prop_assert!(r > 0.0);
        }
    }

    #[test]
    fn error_dynamics_vanish_on_the_desired_orbit(xd1 in -2.0..2.0f64, xd2 in -2.0..2.0f64) {
        let problem = TrackingProblem::benchmark(tracking_plant());
        let system = tracking_transform(&problem);
        let f = system.drift(&v(&[0.0, 0.0, xd1, xd2])).unwrap();
        prop_assert!(f[0].abs() < 1e-12 && f[1].abs() < 1e-12);
    }
}

#[test]
fn running_cost_examples() {
    let (_, cost, _) = regulation_benchmark();
    assert_eq!(running_cost(&cost, &v(&[1.0, 1.0]), &v(&[1.0])).unwrap(), 3.0);
    assert_eq!(running_cost(&cost, &v(&[0.0, 0.0]), &v(&[0.0])).unwrap(), 0.0);
}

#[test]
fn constant_cost_accumulates_exactly() {
    let (_, cost, _) = regulation_benchmark();
    let states = vec![v(&[1.0, 0.0]); 10_000];
    let controls = vec![v(&[0.0]); 10_000];
    let total = accumulate_cost(&cost, &states, &controls, 0.001).unwrap();
    assert!((total - 10.0).abs() < 1e-9, "{total}");
}

#[test]
fn cost_spec_rejects_bad_weights() {
    let q = DMatrix::identity(2, 2);
    assert!(matches!(
        CostSpec::new(q.clone(), DMatrix::from_element(1, 1, 0.0)),
        Err(StafError::Config(_))
    ));
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(CostSpec::new(q.clone(), asym).is_err());
    assert!(CostSpec::new(-q, DMatrix::identity(1, 1)).is_err());
}

#[test]
fn desired_block_of_tracking_drift() {
    let problem = TrackingProblem::benchmark(tracking_plant());
    let system = tracking_transform(&problem);
    let f = system.drift(&v(&[0.0, 0.0, 0.0, 1.0])).unwrap();
    assert_eq!(f.rows(2, 2).into_owned(), v(&[1.0, 1.0]));
}

#[test]
fn tracking_drift_matches_hand_evaluation() {
    // xd = [0, 1], e = [0.1, -0.2], x = [0.1, 0.8]
    // hd = [1, 1], f(xd) = [1, -1.5], g(xd) = [0; 3], feedforward = 2.5/3
    // ė = f(x) − hd + g(x)·(2.5/3)
    let problem = TrackingProblem::benchmark(tracking_plant());
    let system = tracking_transform(&problem);
    let zeta = v(&[0.1, -0.2, 0.0, 1.0]);
    let f = system.drift(&zeta).unwrap();
    let expected = [-0.29999999999999993, 0.2413621837312041, 1.0, 1.0];
    for (got, want) in f.iter().zip(expected) {
        assert_relative_eq!(*got, want, epsilon = 1e-12);
    }
    assert_relative_eq!(system.feedforward(&v(&[0.0, 1.0])).unwrap()[0], 2.5 / 3.0, epsilon = 1e-15);

    let g = system.effectiveness(&zeta).unwrap();
    assert_eq!(g.shape(), (4, 1));
    assert_eq!(g.rows(2, 2).into_owned(), DMatrix::zeros(2, 1));
}

#[test]
fn plant_input_adds_feedforward() {
    let problem = TrackingProblem::benchmark(tracking_plant());
    let system = tracking_transform(&problem);
    let u = system.plant_input(&v(&[0.1, -0.2, 0.0, 1.0]), &v(&[0.5])).unwrap();
    assert_relative_eq!(u[0], 0.5 + 2.5 / 3.0, epsilon = 1e-15);
}

#[test]
fn pseudo_inverse_is_a_left_inverse_for_the_plant() {
    let (plant, _, _) = regulation_benchmark();
    for x1 in [-2.0, -0.7, 0.0, 0.4, 1.9] {
        let g = plant.effectiveness(&v(&[x1, 0.3])).unwrap();
        let gp = pseudo_inverse(&g).unwrap();
        assert_relative_eq!(gp * g, DMatrix::identity(1, 1), epsilon = 1e-12);
    }
}

#[test]
fn pseudo_inverse_rejects_rank_deficiency() {
    let err = pseudo_inverse(&DMatrix::zeros(2, 1)).unwrap_err();
    assert!(matches!(err, StafError::NumericRange(_)));
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
    assert!(pseudo_inverse(&m).is_err());
}
