use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adp::{actor_rhs, bellman_point_with_centers, critic_rhs, gamma_rhs, AdpGains, AdpState, BePoint};
use crate::dynamics::{concat, ControlAffine, CostSpec, TrackingProblem, TrackingSystem};
use crate::error::{Result, StafError};
use crate::excitation::{place_points, ExtrapolationPolicy};
use crate::kernel::StafBasis;
use crate::ode::{OdeState, Slot, Stepper};
use crate::savgol::DerivativeFilter;
use crate::sysid::{benchmark_theta, identifier_rhs, HistoryStack, IdentifierGains, LinearDriftModel, StackEntry};

use super::{abort_at, condition_gamma, finish_proxies, probe, SimConfig, Trajectory};

/// Tracking experiment with an uncertain, identified drift.
#[derive(Debug, Clone)]
pub struct TrackingExperiment {
    /// The problem around the true plant.
    pub problem: TrackingProblem<LinearDriftModel>,
    pub basis: StafBasis,
    pub gains: AdpGains,
    pub policy: ExtrapolationPolicy,
    pub x0: DVector<f64>,
    pub x_hat0: DVector<f64>,
    pub theta0: DMatrix<f64>,
    pub initial: AdpState,
    pub identifier: IdentifierGains,
    pub stack_capacity: usize,
    /// Savitzky-Golay window (samples) for the recorded state derivatives.
    pub derivative_window: usize,
    /// Steps between offers of a new history-stack candidate.
    pub stack_interval: usize,
}

/// Circumradius of the kernel simplex in the tracking experiment.
pub const TRACKING_SIMPLEX_SCALE: f64 = 1.0;

impl TrackingExperiment {
    pub fn benchmark_defaults() -> Self {
        let truth = benchmark_theta();
        let plant = LinearDriftModel::new(truth.clone())
            .expect("benchmark parameters are 3 x 2")
            .with_truth(truth);
        let w0 = DVector::from_element(5, 0.025);
        TrackingExperiment {
            problem: TrackingProblem::benchmark(plant),
            basis: StafBasis::simplex(4, TRACKING_SIMPLEX_SCALE).expect("simplex basis is well formed"),
            gains: AdpGains::tracking_defaults(),
            policy: ExtrapolationPolicy::single_uniform(),
            x0: DVector::zeros(2),
            x_hat0: DVector::zeros(2),
            theta0: DMatrix::zeros(3, 2),
            initial: AdpState {
                w_critic: w0.clone(),
                w_actor: w0,
                gamma: DMatrix::identity(5, 5) * 50.0,
            },
            identifier: IdentifierGains::tracking_defaults(),
            stack_capacity: 10,
            derivative_window: 11,
            stack_interval: 10,
        }
    }
}

struct Slots {
    x: Slot,
    xd: Slot,
    x_hat: Slot,
    theta: Slot,
    wc: Slot,
    wa: Slot,
    gamma: Slot,
    cost: Slot,
}

struct Evaluation {
    zeta: DVector<f64>,
    current: BePoint,
    extrap: Vec<BePoint>,
    /// Plant input `μ̂ + g⁺(xd)(hd(xd) − f̂(xd))`.
    u: DVector<f64>,
}

fn evaluate(
    exp: &TrackingExperiment,
    cost: &CostSpec,
    model: &LinearDriftModel,
    x: &DVector<f64>,
    xd: &DVector<f64>,
    wc: &DVector<f64>,
    wa: &DVector<f64>,
    unit_offsets: &[DVector<f64>],
) -> Result<Evaluation> {
    let system = TrackingSystem::new(model, exp.problem.desired_matrix.clone());
    let basis = &exp.basis;
    let nu = exp.gains.nu;
    let zeta = concat(&(x - xd), xd);
    let centers = basis.centers(&zeta)?;
    let current = bellman_point_with_centers(&system, cost, basis, nu, &zeta, &centers, wc, wa)?;
    let half_width = exp.policy.half_width(basis.shrink().value(&zeta));
    let extrap = place_points(&zeta, unit_offsets, half_width)
        .iter()
        .map(|zi| bellman_point_with_centers(&system, cost, basis, nu, zi, &centers, wc, wa))
        .collect::<Result<Vec<_>>>()?;
    let u = &current.u_hat + system.feedforward(xd)?;
    Ok(Evaluation {
        zeta,
        current,
        extrap,
        u,
    })
}

/// Integrate plant, desired trajectory, observer, drift estimate, critic,
/// actor, gain matrix, and running cost. The controller and the Bellman
/// errors use the identified drift (certainty equivalence); the plant
/// evolves with the true one.
pub fn run_tracking(config: &SimConfig, exp: &TrackingExperiment) -> Result<Trajectory> {
    let steps = config.num_steps()?;
    exp.policy.validate(exp.basis.dimension())?;
    if exp.stack_interval == 0 {
        return Err(StafError::Config("stack_interval must be at least 1".into()));
    }
    let n = exp.problem.plant.state_dim();
    if exp.basis.dimension() != 2 * n {
        return Err(StafError::dims("tracking basis", 2 * n, exp.basis.dimension()));
    }
    let dt = config.dt;
    let cost = exp.problem.cost()?;
    let filter = DerivativeFilter::quintic(exp.derivative_window)?;
    let mut stack = HistoryStack::new(exp.stack_capacity)?;
    let truth = exp.problem.plant.theta_true.clone();
    let a = exp.problem.desired_matrix.clone();

    let mut layout = OdeState::new();
    let slots = Slots {
        x: layout.push_vector(&exp.x0),
        xd: layout.push_vector(&exp.problem.desired_initial),
        x_hat: layout.push_vector(&exp.x_hat0),
        theta: layout.push_matrix(&exp.theta0),
        wc: layout.push_vector(&exp.initial.w_critic),
        wa: layout.push_vector(&exp.initial.w_actor),
        gamma: layout.push_matrix(&exp.initial.gamma),
        cost: layout.push_scalar(0.0),
    };
    let mut y = layout.into_vector();
    let model_at = |y: &DVector<f64>| LinearDriftModel {
        theta_hat: slots.theta.read_matrix(y),
        theta_true: truth.clone(),
    };

    let mut stepper = Stepper::new(config.integrator);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut offsets = exp.policy.unit_offsets(2 * n, &mut rng)?;
    let mut history: VecDeque<(DVector<f64>, DVector<f64>)> = VecDeque::with_capacity(exp.derivative_window);

    let mut traj = Trajectory {
        dt,
        error_dim: n,
        ..Trajectory::default()
    };
    let mut gamma = exp.initial.gamma.clone();
    let (lo, hi, _) = condition_gamma(&mut gamma);
    let mut eigs = (lo, hi);
    slots.gamma.write_matrix(&mut y, &gamma);

    for k in 0..=steps {
        let t = k as f64 * dt;
        let x = slots.x.read_vector(&y);
        let xd = slots.xd.read_vector(&y);
        let wc = slots.wc.read_vector(&y);
        let wa = slots.wa.read_vector(&y);
        let model = model_at(&y);
        if k > 0 && exp.policy.resample_every_step {
            offsets = exp.policy.unit_offsets(2 * n, &mut rng)?;
        }
        let eval = evaluate(exp, &cost, &model, &x, &xd, &wc, &wa, &offsets).map_err(abort_at(t))?;

        if history.len() == exp.derivative_window {
            history.pop_front();
        }
        history.push_back((x.clone(), eval.u.clone()));
        if history.len() == exp.derivative_window && k % exp.stack_interval == 0 {
            let mid = exp.derivative_window / 2;
            let xdot = filter.derivative_vec(history.iter().map(|(x, _)| x), dt)?;
            stack.insert(StackEntry {
                x: history[mid].0.clone(),
                u: history[mid].1.clone(),
                xdot,
            });
        }

        if k % config.record_stride == 0 || k == steps {
            traj.times.push(t);
            traj.states.push(eval.zeta.clone());
            traj.controls.push(eval.u.clone());
            traj.w_critic.push(wc.clone());
            traj.w_actor.push(wa.clone());
            traj.gamma_eigs.push(eigs);
            traj.accumulated_cost.push(slots.cost.read_scalar(&y));
            traj.value_error.push(f64::NAN);
            traj.control_error.push(f64::NAN);
            traj.theta.push(model.theta_hat.clone());
            traj.stack_min_singular_value.push(stack.min_singular_value());
        }
        if k == steps {
            break;
        }
        {
            let system = TrackingSystem::new(&model, a.clone());
            probe(&mut traj, &system, &cost, &wc, &eval.current, &eval.extrap).map_err(abort_at(t))?;
        }

        let gains = exp.gains;
        stepper
            .advance(&mut y, t, dt, |_, y| {
                let x = slots.x.read_vector(y);
                let xd = slots.xd.read_vector(y);
                let x_hat = slots.x_hat.read_vector(y);
                let wc = slots.wc.read_vector(y);
                let wa = slots.wa.read_vector(y);
                let gamma = slots.gamma.read_matrix(y);
                let model = model_at(y);
                let ev = evaluate(exp, &cost, &model, &x, &xd, &wc, &wa, &offsets)?;
                let (x_hat_dot, theta_dot) = identifier_rhs(&model, &stack, &x, &x_hat, &ev.u, &exp.identifier)?;

                let mut out = DVector::zeros(y.len());
                slots.x.write_vector(&mut out, &exp.problem.plant.velocity(&x, &ev.u)?);
                slots.xd.write_vector(&mut out, &(&a * &xd));
                slots.x_hat.write_vector(&mut out, &x_hat_dot);
                slots.theta.write_matrix(&mut out, &theta_dot);
                slots.wc.write_vector(&mut out, &critic_rhs(&gains, &gamma, &ev.current, &ev.extrap));
                slots.wa.write_vector(&mut out, &actor_rhs(&gains, &wa, &wc, &ev.current, &ev.extrap));
                slots.gamma.write_matrix(&mut out, &gamma_rhs(&gains, &gamma, &ev.current, &ev.extrap));
                let r = cost.state_cost(&ev.zeta)? + cost.control_cost(&ev.current.u_hat)?;
                slots.cost.write_scalar(&mut out, r);
                Ok(out)
            })
            .map_err(abort_at(t + dt))?;

        let mut gamma = slots.gamma.read_matrix(&y);
        let (lo, hi, lifted) = condition_gamma(&mut gamma);
        if lifted {
            traj.diagnostics.gamma_projection_events += 1;
        }
        slots.gamma.write_matrix(&mut y, &gamma);
        eigs = (lo, hi);
    }
    traj.diagnostics.integrator_steps = stepper.accepted();
    traj.diagnostics.integrator_rejections = stepper.rejected();
    finish_proxies(&mut traj);
    Ok(traj)
}
