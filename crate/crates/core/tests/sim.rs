use nalgebra::DVector;
use staf_core::excitation::{ExtrapolationKind, ExtrapolationPolicy};
use staf_core::ode::Integrator;
use staf_core::report::{csv_header, csv_string};
use staf_core::sim::{metrics, rms_over, run_regulation, run_tracking, RegulationExperiment, SimConfig, TrackingExperiment, Trajectory};
use staf_core::StafError;

fn short(duration: f64) -> SimConfig {
    SimConfig {
        duration,
        ..SimConfig::regulation_defaults()
    }
}

fn assert_consistent(traj: &Trajectory) {
    let n = traj.len();
    for len in [
        traj.states.len(),
        traj.controls.len(),
        traj.w_critic.len(),
        traj.w_actor.len(),
        traj.gamma_eigs.len(),
        traj.accumulated_cost.len(),
        traj.value_error.len(),
        traj.control_error.len(),
    ] {
        assert_eq!(len, n);
    }
    for w in traj.accumulated_cost.windows(2) {
        assert!(w[1] >= w[0]);
    }
    for &(lo, hi) in &traj.gamma_eigs {
        assert!(lo > 0.0 && lo <= hi);
    }
}

#[test]
fn origin_is_an_equilibrium() {
    let mut exp = RegulationExperiment::benchmark_defaults();
    exp.x0 = DVector::zeros(2);
    exp.initial.w_actor = DVector::zeros(3);
    let traj = run_regulation(&short(1.0), &exp).unwrap();
    // The critic keeps learning from the extrapolated points, which pulls the
    // actor weights apart, so the control at the origin is tiny but not zero.
    let worst = traj.states.iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn origin_is_exactly_still_without_extrapolation() {
    // No extrapolation: ω = 0 and δ = 0 at the origin, so the critic stays
    // at 0.4·1 and the actor weights stay equal, which cancels the control.
    let mut exp = RegulationExperiment::benchmark_defaults();
    exp.x0 = DVector::zeros(2);
    exp.initial.w_actor = DVector::zeros(3);
    exp.gains.eta_c2 = 0.0;
    let traj = run_regulation(&short(1.0), &exp).unwrap();
    for x in &traj.states {
        assert_eq!(x.norm(), 0.0);
    }
    assert_eq!(*traj.accumulated_cost.last().unwrap(), 0.0);
}

#[test]
fn short_regulation_run_is_consistent() {
    let traj = run_regulation(&short(0.3), &RegulationExperiment::benchmark_defaults()).unwrap();
    assert_eq!(traj.len(), 301);
    assert_consistent(&traj);
    assert!(traj.diagnostics.be_identity_max_gap < 1e-12);
    assert_eq!(traj.diagnostics.regressors.len(), 300);
    assert!(traj.diagnostics.integrator_steps >= 300);
    // Cost starts at zero and grows by roughly r(x0) per unit time.
    assert_eq!(traj.accumulated_cost[0], 0.0);
    assert!(traj.accumulated_cost[1] > 0.0);
}

#[test]
fn zero_duration_records_only_the_initial_state() {
    let traj = run_regulation(&short(0.0), &RegulationExperiment::benchmark_defaults()).unwrap();
    assert_eq!(traj.len(), 1);
    let m = metrics(&traj, 0.0).unwrap();
    assert_eq!(m.total_cost, 0.0);
}

#[test]
fn record_stride_thins_the_output_but_keeps_the_end() {
    let cfg = SimConfig {
        record_stride: 7,
        ..short(0.1)
    };
    let traj = run_regulation(&cfg, &RegulationExperiment::benchmark_defaults()).unwrap();
    assert_eq!(traj.len(), 100 / 7 + 2);
    assert!((traj.final_time() - 0.1).abs() < 1e-12);
}

#[test]
fn fractional_step_count_is_rejected() {
    let cfg = SimConfig {
        duration: 0.0105,
        ..SimConfig::regulation_defaults()
    };
    let err = run_regulation(&cfg, &RegulationExperiment::benchmark_defaults()).unwrap_err();
    assert!(matches!(err, StafError::Config(_)));
}

#[test]
fn identical_seeds_give_identical_csv() {
    let exp = RegulationExperiment::benchmark_defaults();
    let a = csv_string(&run_regulation(&short(0.2), &exp).unwrap());
    let b = csv_string(&run_regulation(&short(0.2), &exp).unwrap());
    assert_eq!(a, b);
    let other = SimConfig { seed: 2, ..short(0.2) };
    let c = csv_string(&run_regulation(&other, &exp).unwrap());
    assert_ne!(a, c);
}

#[test]
fn halving_the_step_barely_moves_the_cost() {
    // A fixed extrapolation grid keeps the comparison free of sampling noise.
    let mut exp = RegulationExperiment::benchmark_defaults();
    exp.policy = ExtrapolationPolicy {
        kind: ExtrapolationKind::FixedGrid,
        num_points: 9,
        ..exp.policy
    };
    let coarse = run_regulation(&short(0.4), &exp).unwrap();
    let fine = run_regulation(&SimConfig { dt: 0.0005, ..short(0.4) }, &exp).unwrap();
    let (a, b) = (
        *coarse.accumulated_cost.last().unwrap(),
        *fine.accumulated_cost.last().unwrap(),
    );
    assert!((a - b).abs() / a < 5e-3, "{a} vs {b}");
}

#[test]
fn blowup_reports_the_failure_time() {
    let exp = RegulationExperiment::benchmark_defaults();
    let cfg = SimConfig {
        integrator: Integrator::rk4(),
        ..short(1.0)
    };
    match run_regulation(&cfg, &exp) {
        Err(StafError::Diverged { time, .. }) => assert!(time > 0.0 && time <= 1.0),
        other => panic!("expected divergence, got {:?}", other.map(|t| t.len())),
    }
}

#[test]
fn tracking_starts_off_the_desired_orbit_and_learns() {
    let exp = TrackingExperiment::benchmark_defaults();
    let cfg = SimConfig {
        duration: 0.5,
        ..SimConfig::tracking_defaults()
    };
    let traj = run_tracking(&cfg, &exp).unwrap();
    assert_consistent(&traj);
    assert_eq!(traj.theta.len(), traj.len());
    // x(0) = 0 while xd(0) = [0, 1].
    assert!((traj.error_norm(0) - 1.0).abs() < 1e-12);
    assert!(traj.theta.last().unwrap().amax() > 0.0);
    for w in traj.stack_min_singular_value.windows(2) {
        assert!(w[1] >= w[0]);
    }
    let header = csv_header(&traj);
    assert_eq!(header.len(), 1 + 4 + 1 + 5 + 5 + 4 + 6);
    assert_eq!(header.last().unwrap(), "theta_3_2");
}

#[test]
fn metric_examples() {
    let mut traj = Trajectory {
        dt: 0.1,
        error_dim: 2,
        ..Trajectory::default()
    };
    for k in 0..=10 {
        traj.times.push(k as f64 * 0.1);
        traj.states.push(DVector::from_vec(vec![0.6, 0.8]));
        traj.accumulated_cost.push(k as f64);
    }
    let m = metrics(&traj, 0.2).unwrap();
    assert!((m.steady_state_rms - 1.0).abs() < 1e-15);
    assert_eq!(m.total_cost, 10.0);
    assert!(metrics(&traj, 5.0).is_err());

    for s in &mut traj.states {
        s.fill(0.0);
    }
    for c in &mut traj.accumulated_cost {
        *c = 0.0;
    }
    let m = metrics(&traj, 0.5).unwrap();
    assert_eq!((m.total_cost, m.steady_state_rms), (0.0, 0.0));
    assert_eq!(rms_over(&[0.0, 1.0, 2.0], [3.0, 4.0, 0.0], 1.0), (8.0f64).sqrt());
}
