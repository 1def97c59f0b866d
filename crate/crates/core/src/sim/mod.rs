//! Closed-loop simulation of the learning controller and run metrics.

mod metrics;
mod regulation;
mod tracking;

use nalgebra::{DMatrix, DVector};

pub use metrics::{metrics, rms_over, Metrics};
pub use regulation::{run_regulation, RegulationExperiment};
pub use tracking::{run_tracking, TrackingExperiment, TRACKING_SIMPLEX_SCALE};

use crate::adp::{bellman_error_by_definition, BePoint};
use crate::dynamics::{ControlAffine, CostSpec};
use crate::error::{Result, StafError};
use crate::excitation::{NormProxies, RegressorSample};
use crate::ode::Integrator;

/// Eigenvalues of Γ are kept at or above this after every step.
pub const GAMMA_EIG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub integrator: Integrator,
    pub seed: u64,
    /// Steps between recorded samples; the final state is always recorded.
    pub record_stride: usize,
}

impl SimConfig {
    pub fn regulation_defaults() -> Self {
        SimConfig {
            dt: 0.001,
            duration: 10.0,
            integrator: Integrator::default(),
            seed: 1,
            record_stride: 1,
        }
    }

    pub fn tracking_defaults() -> Self {
        SimConfig {
            duration: 40.0,
            ..Self::regulation_defaults()
        }
    }

    /// Number of integration steps; `duration` must be a whole multiple of `dt`.
    pub fn num_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(StafError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(StafError::Config(format!(
                "duration must be nonnegative, got {}",
                self.duration
            )));
        }
        self.integrator.validate()?;
        if self.record_stride == 0 {
            return Err(StafError::Config("record_stride must be at least 1".into()));
        }
        let ratio = self.duration / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 {
            return Err(StafError::Config(format!(
                "duration {} is not a whole number of {} s steps",
                self.duration, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Quantities gathered along a run for the excitation and consistency checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunDiagnostics {
    /// Normalized regressors at the start of every step.
    pub regressors: Vec<RegressorSample>,
    /// Largest disagreement between the regressor-form and definition-form
    /// Bellman errors, relative to `max(1, |δ|)`.
    pub be_identity_max_gap: f64,
    /// Steps on which an eigenvalue of Γ had to be lifted to the floor.
    pub gamma_projection_events: usize,
    pub proxies: NormProxies,
    /// `sup ‖g R⁻¹ gᵀ‖ ‖∇σ‖`, combined with the `∇W` estimate into
    /// `proxies.g_w_sigma` once the run ends.
    pub input_gradient_sup: f64,
    pub integrator_steps: usize,
    pub integrator_rejections: usize,
}

/// Time-indexed record of a run. All per-sample vectors have equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub dt: f64,
    /// Leading state components forming the regulated error (`x` itself for
    /// regulation, `e` for tracking).
    pub error_dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub w_critic: Vec<DVector<f64>>,
    pub w_actor: Vec<DVector<f64>>,
    /// `(λmin, λmax)` of Γ.
    pub gamma_eigs: Vec<(f64, f64)>,
    pub accumulated_cost: Vec<f64>,
    /// `|V̂(x) − V*(x)|`; NaN without an analytic solution.
    pub value_error: Vec<f64>,
    /// `|u − u*(x)|`; NaN without an analytic solution.
    pub control_error: Vec<f64>,
    /// Drift-parameter estimates (tracking only, otherwise empty).
    pub theta: Vec<DMatrix<f64>>,
    /// Smallest singular value of the history stack (tracking only).
    pub stack_min_singular_value: Vec<f64>,
    pub diagnostics: RunDiagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn error_norm(&self, k: usize) -> f64 {
        self.states[k].rows(0, self.error_dim).norm()
    }
}

/// Symmetrize Γ and lift eigenvalues below the floor. Returns the
/// eigenvalue extremes and whether a lift happened.
pub(crate) fn condition_gamma(gamma: &mut DMatrix<f64>) -> (f64, f64, bool) {
    let sym = (&*gamma + gamma.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if lo >= GAMMA_EIG_FLOOR {
        *gamma = sym;
        return (lo, hi, false);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(GAMMA_EIG_FLOOR));
    *gamma = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    (clipped.min(), clipped.max(), true)
}

/// Estimate `sup ‖∇W‖` from recorded critic-weight changes per unit state
/// change and fold it into the `G_Wσ` proxy.
pub(crate) fn finish_proxies(traj: &mut Trajectory) {
    let mut grad_w: f64 = 0.0;
    for k in 1..traj.len() {
        let dx = (&traj.states[k] - &traj.states[k - 1]).norm();
        if dx > 1e-6 {
            let dw = (&traj.w_critic[k] - &traj.w_critic[k - 1]).norm();
            grad_w = grad_w.max(dw / dx);
        }
    }
    let diag = &mut traj.diagnostics;
    diag.proxies.g_w_sigma = grad_w * diag.input_gradient_sup;
}

pub(crate) fn abort_at(time: f64) -> impl FnOnce(StafError) -> StafError {
    move |e| match e {
        StafError::Diverged { .. } => e,
        other => StafError::Diverged {
            time,
            source: Box::new(other),
        },
    }
}

/// Per-step diagnostics at the left end of a step: regressors for the
/// excitation estimate, the Bellman-error identity check, and proxy norms.
pub(crate) fn probe<S: ControlAffine>(
    traj: &mut Trajectory,
    system: &S,
    cost: &CostSpec,
    wc: &DVector<f64>,
    current: &BePoint,
    extrap: &[BePoint],
) -> Result<()> {
    let diag = &mut traj.diagnostics;
    diag.regressors.push(RegressorSample {
        current: current.normalized_regressor(),
        extrapolated: extrap.iter().map(BePoint::normalized_regressor).collect(),
    });
    for p in std::iter::once(current).chain(extrap) {
        let by_definition = bellman_error_by_definition(system, cost, p, wc)?;
        let gap = (by_definition - p.delta).abs() / p.delta.abs().max(1.0);
        diag.be_identity_max_gap = diag.be_identity_max_gap.max(gap);
        diag.proxies.g_sigma = diag.proxies.g_sigma.max(p.g_sigma.norm());
        diag.proxies.w_t_g_sigma = diag.proxies.w_t_g_sigma.max(p.g_sigma.tr_mul(wc).norm());
        let g = system.effectiveness(&p.x_eval)?;
        let g_sq = (&g * cost.control_weight_inv() * g.transpose()).norm();
        diag.input_gradient_sup = diag.input_gradient_sup.max(g_sq * p.grad_sigma.norm());
    }
    diag.proxies.w = diag.proxies.w.max(wc.norm());
    Ok(())
}
