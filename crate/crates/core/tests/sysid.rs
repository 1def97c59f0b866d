use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use staf_core::dynamics::{regulation_benchmark, ControlAffine};
use staf_core::ode::Integrator;
use staf_core::sysid::{
    benchmark_theta, features_benchmark, identifier_rhs, identifier_step, stacked_min_singular_value,
    HistoryStack, IdentifierGains, LinearDriftModel, StackEntry,
};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn entry(x: &[f64]) -> StackEntry {
    StackEntry {
        x: v(x),
        u: v(&[0.0]),
        xdot: v(&[0.0, 0.0]),
    }
}

/// Stack entries consistent with the true drift, the given input, and the
/// exact state derivative.
fn exact_entry(x: DVector<f64>, u: f64) -> StackEntry {
    let model = LinearDriftModel::new(benchmark_theta()).unwrap();
    let u = v(&[u]);
    let xdot = model.velocity(&x, &u).unwrap();
    StackEntry { x, u, xdot }
}

#[test]
fn feature_examples() {
    assert_eq!(features_benchmark(&v(&[0.0, 0.0])), v(&[0.0, 0.0, 0.0]));
    assert_eq!(features_benchmark(&v(&[0.0, 1.0])), v(&[0.0, 1.0, 3.0]));
}

#[test]
fn parameterized_drift_matches_its_closed_form() {
    // θᵀσθ(x) = [−x1 + x2; −½x1 − ½x2(cos 2x1 + 2)]
    let model = LinearDriftModel::new(benchmark_theta()).unwrap();
    let (bench, _, _) = regulation_benchmark();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = v(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
        let b = (2.0 * x[0]).cos() + 2.0;
        let closed = v(&[-x[0] + x[1], -0.5 * x[0] - 0.5 * x[1] * b]);
        assert_relative_eq!(model.drift(&x).unwrap(), closed, epsilon = 1e-12);
        assert_eq!(model.effectiveness(&x).unwrap(), bench.effectiveness(&x).unwrap());
    }
    // The identified plant is a different system from the regulation one.
    let x = v(&[0.3, 1.0]);
    assert!((model.drift(&x).unwrap() - bench.drift(&x).unwrap()).norm() > 1.0);
}

#[test]
fn true_parameters_are_a_fixed_point() {
    let model = LinearDriftModel::new(benchmark_theta()).unwrap();
    let mut stack = HistoryStack::new(10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..15 {
        let x = v(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        stack.insert(exact_entry(x, rng.gen_range(-1.0..1.0)));
    }
    let x = v(&[0.4, -0.6]);
    let (_, theta_dot) =
        identifier_rhs(&model, &stack, &x, &x, &v(&[0.3]), &IdentifierGains::tracking_defaults()).unwrap();
    assert!(theta_dot.amax() < 1e-12);
}

#[test]
fn empty_stack_and_matched_observer_leave_parameters_alone() {
    let model = LinearDriftModel::new(DMatrix::from_element(3, 2, 0.3)).unwrap();
    let stack = HistoryStack::new(10).unwrap();
    let x = v(&[0.4, -0.6]);
    let (_, theta_dot) =
        identifier_rhs(&model, &stack, &x, &x, &v(&[0.3]), &IdentifierGains::tracking_defaults()).unwrap();
    assert_eq!(theta_dot, DMatrix::zeros(3, 2));
}

#[test]
fn identifier_matches_hand_evaluation() {
    let theta = DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 0.3, 0.0, -0.4, 0.5]);
    let model = LinearDriftModel::new(theta).unwrap();
    let mut stack = HistoryStack::new(10).unwrap();
    stack.insert(StackEntry {
        x: v(&[0.5, -0.3]),
        u: v(&[0.2]),
        xdot: v(&[1.0, -2.0]),
    });
    let gains = IdentifierGains {
        k: 500.0,
        k_theta: 20.0,
        gamma_theta: DMatrix::from_diagonal(&v(&[1.0, 2.0, 3.0])),
    };
    let (xh_dot, th_dot) =
        identifier_rhs(&model, &stack, &v(&[0.2, -0.1]), &v(&[0.25, -0.05]), &v(&[0.7]), &gains).unwrap();
    assert_relative_eq!(xh_dot, v(&[-24.893157560239878, -23.141310353898124]), max_relative = 1e-12);
    let expected = DMatrix::from_row_slice(
        3,
        2,
        &[
            7.341637232958233,
            -20.280151152934074,
            -8.81196467954988,
            24.33418138352089,
            -33.571869911711715,
            92.72997700027952,
        ],
    );
    assert_relative_eq!(th_dot, expected, max_relative = 1e-12);
}

fn stack_residual(model: &LinearDriftModel, stack: &HistoryStack) -> f64 {
    stack
        .entries()
        .iter()
        .map(|e| (&e.xdot - model.velocity(&e.x, &e.u).unwrap()).norm_squared())
        .sum()
}

#[test]
fn replayed_stack_descends_its_residual() {
    let mut model = LinearDriftModel::new(DMatrix::zeros(3, 2))
        .unwrap()
        .with_truth(benchmark_theta());
    let mut stack = HistoryStack::new(10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let x = v(&[rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]);
        stack.insert(exact_entry(x, rng.gen_range(-1.0..1.0)));
    }
    assert!(stack.min_singular_value() > 0.0);
    let x = v(&[0.2, 0.1]);
    let gains = IdentifierGains::tracking_defaults();
    let start = stack_residual(&model, &stack);
    let mut last = start;
    for _ in 0..200 {
        // Hold the observer on the state so only the replay term acts.
        let mut x_hat = x.clone();
        identifier_step(&mut model, &stack, &x, &mut x_hat, &v(&[0.0]), &gains, Integrator::rk4(), 0.001).unwrap();
        let r = stack_residual(&model, &stack);
        assert!(r <= last);
        last = r;
    }
    assert!(last < 1e-2 * start, "{start} -> {last}");
    assert!(model.parameter_error().unwrap() < 1.0);
}

#[test]
fn empty_stack_always_accepts() {
    let mut stack = HistoryStack::new(3).unwrap();
    assert!(stack.is_empty());
    assert!(stack.insert(entry(&[0.0, 0.0])));
    assert_eq!(stack.len(), 1);
}

#[test]
fn duplicate_candidate_is_discarded_when_full() {
    let mut stack = HistoryStack::new(3).unwrap();
    for x in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
        assert!(stack.insert(entry(&x)));
    }
    let before = stack.clone();
    assert!(!stack.insert(entry(&[1.0, 0.0])));
    assert_eq!(stack, before);
}

#[test]
fn replacement_matches_exhaustive_search() {
    let mut stack = HistoryStack::new(3).unwrap();
    // [0, 1, 3] and [0, 2, 6] are collinear, so the stack starts singular.
    for x in [[1.0, 0.0], [0.0, 1.0], [0.0, 2.0]] {
        stack.insert(entry(&x));
    }
    assert!(stack.min_singular_value() < 1e-12);
    let candidate = [0.5, 1.0];

    let rows: Vec<DVector<f64>> = stack.entries().iter().map(|e| features_benchmark(&e.x)).collect();
    let mut best = (usize::MAX, 0.0);
    for j in 0..3 {
        let mut trial = rows.clone();
        trial[j] = features_benchmark(&v(&candidate));
        let m = DMatrix::from_fn(3, 3, |r, c| trial[r][c]);
        let s = m.svd(false, false).singular_values.min();
        if s > best.1 {
            best = (j, s);
        }
    }
    assert!(best.1 > 0.0);

    assert!(stack.insert(entry(&candidate)));
    assert_eq!(stack.entries()[best.0].x, v(&candidate));
    assert_relative_eq!(stack.min_singular_value(), best.1, max_relative = 1e-12);
}

#[test]
fn short_stacks_have_zero_singular_value() {
    assert_eq!(stacked_min_singular_value(&[]), 0.0);
    assert_eq!(stacked_min_singular_value(&[v(&[1.0, 2.0, 3.0])]), 0.0);
}

proptest! {
    #[test]
    fn full_stack_singular_value_never_drops(
        xs in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 5..40),
    ) {
        let mut stack = HistoryStack::new(4).unwrap();
        let mut last = 0.0;
        for (i, (a, b)) in xs.into_iter().enumerate() {
            stack.insert(entry(&[a, b]));
            prop_assert!(stack.len() <= 4);
            if i >= 4 {
                prop_assert!(stack.min_singular_value() >= last);
            }
            last = stack.min_singular_value();
        }
    }
}
