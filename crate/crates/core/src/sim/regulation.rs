use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adp::{
    actor_rhs, bellman_point_with_centers, critic_rhs, gamma_rhs, value_estimate, AdpGains,
    AdpState, BePoint,
};
use crate::dynamics::{regulation_benchmark, AnalyticSolution, BenchmarkPlant, ControlAffine, CostSpec};
use crate::error::Result;
use crate::excitation::{place_points, ExtrapolationPolicy};
use crate::kernel::StafBasis;
use crate::ode::{OdeState, Stepper};

use super::{abort_at, condition_gamma, finish_proxies, probe, SimConfig, Trajectory};

/// Everything needed to run the regulation experiment besides the time grid.
#[derive(Debug, Clone)]
pub struct RegulationExperiment {
    pub plant: BenchmarkPlant,
    pub cost: CostSpec,
    pub solution: Option<AnalyticSolution>,
    pub basis: StafBasis,
    pub gains: AdpGains,
    pub policy: ExtrapolationPolicy,
    pub x0: DVector<f64>,
    pub initial: AdpState,
}

impl RegulationExperiment {
    /// `x(0) = [-1, 1]`, `Ŵc(0) = 0.4·1`, `Ŵa(0) = 0.7·Ŵc(0)`, `Γ(0) = 500 I`.
    pub fn benchmark_defaults() -> Self {
        let (plant, cost, solution) = regulation_benchmark();
        let wc0 = DVector::from_element(3, 0.4);
        RegulationExperiment {
            plant,
            cost,
            solution: Some(solution),
            basis: StafBasis::regulation_triangle(1.0),
            gains: AdpGains::regulation_defaults(),
            policy: ExtrapolationPolicy::single_uniform(),
            x0: DVector::from_vec(vec![-1.0, 1.0]),
            initial: AdpState {
                w_actor: &wc0 * 0.7,
                w_critic: wc0,
                gamma: DMatrix::identity(3, 3) * 500.0,
            },
        }
    }
}

struct Evaluation {
    current: BePoint,
    extrap: Vec<BePoint>,
}

fn evaluate(
    exp: &RegulationExperiment,
    x: &DVector<f64>,
    wc: &DVector<f64>,
    wa: &DVector<f64>,
    unit_offsets: &[DVector<f64>],
) -> Result<Evaluation> {
    let basis = &exp.basis;
    let nu = exp.gains.nu;
    let centers = basis.centers(x)?;
    let current = bellman_point_with_centers(&exp.plant, &exp.cost, basis, nu, x, &centers, wc, wa)?;
    let half_width = exp.policy.half_width(basis.shrink().value(x));
    let extrap = place_points(x, unit_offsets, half_width)
        .iter()
        .map(|xi| bellman_point_with_centers(&exp.plant, &exp.cost, basis, nu, xi, &centers, wc, wa))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation { current, extrap })
}

/// Integrate plant, critic, actor, gain matrix, and running cost as one
/// coupled system. Extrapolation offsets are drawn once per step (in units
/// of the box half-width) and held across the integrator stages.
pub fn run_regulation(config: &SimConfig, exp: &RegulationExperiment) -> Result<Trajectory> {
    let steps = config.num_steps()?;
    exp.policy.validate(exp.basis.dimension())?;
    let n = exp.plant.state_dim();
    let dt = config.dt;

    let mut layout = OdeState::new();
    let xs = layout.push_vector(&exp.x0);
    let wcs = layout.push_vector(&exp.initial.w_critic);
    let was = layout.push_vector(&exp.initial.w_actor);
    let gs = layout.push_matrix(&exp.initial.gamma);
    let cs = layout.push_scalar(0.0);
    let mut y = layout.into_vector();

    let mut stepper = Stepper::new(config.integrator);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut offsets = exp.policy.unit_offsets(n, &mut rng)?;

    let mut traj = Trajectory {
        dt,
        error_dim: n,
        ..Trajectory::default()
    };
    let mut gamma = exp.initial.gamma.clone();
    let mut eigs = {
        let (lo, hi, _) = condition_gamma(&mut gamma);
        (lo, hi)
    };
    gs.write_matrix(&mut y, &gamma);

    for k in 0..=steps {
        let t = k as f64 * dt;
        let x = xs.read_vector(&y);
        let wc = wcs.read_vector(&y);
        let wa = was.read_vector(&y);
        if k > 0 && exp.policy.resample_every_step {
            offsets = exp.policy.unit_offsets(n, &mut rng)?;
        }
        let eval = evaluate(exp, &x, &wc, &wa, &offsets).map_err(abort_at(t))?;

        if k % config.record_stride == 0 || k == steps {
            let cost = cs.read_scalar(&y);
            record(&mut traj, exp, t, cost, &x, &wc, &wa, eigs, &eval).map_err(abort_at(t))?;
        }
        if k == steps {
            break;
        }
        probe(&mut traj, &exp.plant, &exp.cost, &wc, &eval.current, &eval.extrap).map_err(abort_at(t))?;

        let gains = exp.gains;
        stepper.advance(&mut y, t, dt, |_, y| {
            let x = xs.read_vector(y);
            let wc = wcs.read_vector(y);
            let wa = was.read_vector(y);
            let gamma = gs.read_matrix(y);
            let ev = evaluate(exp, &x, &wc, &wa, &offsets)?;
            let mut out = DVector::zeros(y.len());
            xs.write_vector(&mut out, &exp.plant.velocity(&x, &ev.current.u_hat)?);
            wcs.write_vector(&mut out, &critic_rhs(&gains, &gamma, &ev.current, &ev.extrap));
            was.write_vector(&mut out, &actor_rhs(&gains, &wa, &wc, &ev.current, &ev.extrap));
            gs.write_matrix(&mut out, &gamma_rhs(&gains, &gamma, &ev.current, &ev.extrap));
            let r = exp.cost.state_cost(&x)? + exp.cost.control_cost(&ev.current.u_hat)?;
            cs.write_scalar(&mut out, r);
            Ok(out)
        })
        .map_err(abort_at(t + dt))?;

        let mut gamma = gs.read_matrix(&y);
        let (lo, hi, lifted) = condition_gamma(&mut gamma);
        if lifted {
            traj.diagnostics.gamma_projection_events += 1;
        }
        gs.write_matrix(&mut y, &gamma);
        eigs = (lo, hi);
    }
    traj.diagnostics.integrator_steps = stepper.accepted();
    traj.diagnostics.integrator_rejections = stepper.rejected();
    finish_proxies(&mut traj);
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn record(
    traj: &mut Trajectory,
    exp: &RegulationExperiment,
    t: f64,
    cost: f64,
    x: &DVector<f64>,
    wc: &DVector<f64>,
    wa: &DVector<f64>,
    eigs: (f64, f64),
    eval: &Evaluation,
) -> Result<()> {
    let u = eval.current.u_hat.clone();
    let (value_error, control_error) = match &exp.solution {
        Some(sol) => {
            let v_hat = value_estimate(&exp.basis, x, wc)?;
            let u_star = (sol.policy)(x);
            ((v_hat - (sol.value)(x)).abs(), (&u - u_star).norm())
        }
        None => (f64::NAN, f64::NAN),
    };
    traj.times.push(t);
    traj.states.push(x.clone());
    traj.controls.push(u);
    traj.w_critic.push(wc.clone());
    traj.w_actor.push(wa.clone());
    traj.gamma_eigs.push(eigs);
    traj.accumulated_cost.push(cost);
    traj.value_error.push(value_error);
    traj.control_error.push(control_error);
    Ok(())
}
