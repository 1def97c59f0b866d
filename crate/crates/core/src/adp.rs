//! Bellman errors, regressors, and the critic / actor / gain-matrix update
//! laws.
//!
//! Every right-hand side here is a pure function of its inputs. The
//! simulator stacks them into one coupled ODE.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{check_len, ControlAffine, CostSpec};
use crate::error::{Result, StafError};
use crate::excitation::PeEstimate;
use crate::kernel::StafBasis;

/// Scalar learning gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdpGains {
    pub eta_c1: f64,
    pub eta_c2: f64,
    pub eta_a1: f64,
    pub eta_a2: f64,
    /// Forgetting factor of the gain matrix.
    pub beta: f64,
    /// Regressor normalization constant.
    pub nu: f64,
    /// Number of extrapolation points per step.
    pub num_extrap: usize,
}

impl AdpGains {
    pub fn regulation_defaults() -> Self {
        AdpGains {
            eta_c1: 0.001,
            eta_c2: 0.25,
            eta_a1: 1.2,
            eta_a2: 0.01,
            beta: 0.003,
            nu: 0.05,
            num_extrap: 1,
        }
    }

    pub fn tracking_defaults() -> Self {
        AdpGains {
            eta_c1: 0.001,
            eta_c2: 2.0,
            eta_a1: 2.0,
            eta_a2: 0.001,
            beta: 0.01,
            nu: 0.1,
            num_extrap: 1,
        }
    }

    /// Collects every violated field instead of stopping at the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("eta_c1", self.eta_c1),
            ("eta_c2", self.eta_c2),
            ("eta_a1", self.eta_a1),
            ("eta_a2", self.eta_a2),
            ("beta", self.beta),
            ("nu", self.nu),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be strictly positive, got {v}"));
            }
        }
        if self.num_extrap == 0 {
            out.push("num_extrap must be at least 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(StafError::Config(v.join("; ")))
        }
    }
}

/// Critic weights, actor weights, and the least-squares gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdpState {
    pub w_critic: DVector<f64>,
    pub w_actor: DVector<f64>,
    pub gamma: DMatrix<f64>,
}

impl AdpState {
    pub fn new(w_critic: DVector<f64>, w_actor: DVector<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        let l = w_critic.len();
        check_len("actor weights", &w_actor, l)?;
        if gamma.shape() != (l, l) {
            return Err(StafError::dims("gain matrix", l, gamma.nrows()));
        }
        Ok(AdpState {
            w_critic,
            w_actor,
            gamma,
        })
    }
}

/// Everything the update laws need from one Bellman-error evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BePoint {
    pub x_eval: DVector<f64>,
    /// `∇σ(x_eval, c) (f + g û)`, the regressor of the critic weights.
    pub omega: DVector<f64>,
    /// `√(1 + ν ωᵀω)`
    pub rho: f64,
    pub delta: f64,
    /// `∇σ g R⁻¹ gᵀ ∇σᵀ`
    pub g_sigma: DMatrix<f64>,
    pub u_hat: DVector<f64>,
    /// `∇σ(x_eval, c)`; kept for diagnostics.
    pub grad_sigma: DMatrix<f64>,
}

impl BePoint {
    pub fn normalized_regressor(&self) -> DVector<f64> {
        &self.omega / self.rho
    }
}

/// Evaluate the Bellman error at `x_eval` with kernel centers anchored at
/// `centers_state` (the current plant state, also for extrapolated points).
#[allow(clippy::too_many_arguments)]
pub fn bellman_point<S: ControlAffine>(
    system: &S,
    cost: &CostSpec,
    basis: &StafBasis,
    nu: f64,
    x_eval: &DVector<f64>,
    centers_state: &DVector<f64>,
    w_critic: &DVector<f64>,
    w_actor: &DVector<f64>,
) -> Result<BePoint> {
    let centers = basis.centers(centers_state)?;
    bellman_point_with_centers(system, cost, basis, nu, x_eval, &centers, w_critic, w_actor)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn bellman_point_with_centers<S: ControlAffine>(
    system: &S,
    cost: &CostSpec,
    basis: &StafBasis,
    nu: f64,
    x_eval: &DVector<f64>,
    centers: &[DVector<f64>],
    w_critic: &DVector<f64>,
    w_actor: &DVector<f64>,
) -> Result<BePoint> {
    let l = basis.num_kernels();
    check_len("critic weights", w_critic, l)?;
    check_len("actor weights", w_actor, l)?;
    let grad_sigma = basis.grad_sigma_at(x_eval, centers)?;
    let f = system.drift(x_eval)?;
    let g = system.effectiveness(x_eval)?;
    let r_inv = cost.control_weight_inv();

    // gᵀ∇σᵀ, m × L
    let gt_grad = g.transpose() * grad_sigma.transpose();
    let g_sigma = gt_grad.transpose() * r_inv * &gt_grad;
    let u_hat = r_inv * (&gt_grad * w_actor) * -0.5;
    let omega = &grad_sigma * &f - (&g_sigma * w_actor) * 0.5;
    let rho = (1.0 + nu * omega.norm_squared()).sqrt();
    let delta = w_critic.dot(&omega) + cost.state_cost(x_eval)? + cost.control_cost(&u_hat)?;

    Ok(BePoint {
        x_eval: x_eval.clone(),
        omega,
        rho,
        delta,
        g_sigma,
        u_hat,
        grad_sigma,
    })
}

/// Bellman error recomputed from its definition
/// `r(x, û) + ∇V̂ (f + g û)`, independent of the regressor form.
pub fn bellman_error_by_definition<S: ControlAffine>(
    system: &S,
    cost: &CostSpec,
    point: &BePoint,
    w_critic: &DVector<f64>,
) -> Result<f64> {
    let x = &point.x_eval;
    let grad_v = point.grad_sigma.transpose() * w_critic;
    let xdot = system.velocity(x, &point.u_hat)?;
    Ok(cost.state_cost(x)? + cost.control_cost(&point.u_hat)? + grad_v.dot(&xdot))
}

fn extrapolation_weight(gains: &AdpGains, extrap: &[BePoint]) -> f64 {
    if extrap.is_empty() {
        0.0
    } else {
        gains.eta_c2 / extrap.len() as f64
    }
}

/// `Ŵ̇c = −η_c1 Γ (ω/ρ) δ − (η_c2/N) Γ Σ (ω_i/ρ_i) δ_i`
pub fn critic_rhs(gains: &AdpGains, gamma: &DMatrix<f64>, current: &BePoint, extrap: &[BePoint]) -> DVector<f64> {
    let mut acc = &current.omega * (gains.eta_c1 * current.delta / current.rho);
    let w = extrapolation_weight(gains, extrap);
    for p in extrap {
        acc += &p.omega * (w * p.delta / p.rho);
    }
    -(gamma * acc)
}

/// `Γ̇ = βΓ − η_c1 Γ (ωωᵀ/ρ²) Γ − (η_c2/N) Γ Σ (ω_iω_iᵀ/ρ_i²) Γ`
pub fn gamma_rhs(gains: &AdpGains, gamma: &DMatrix<f64>, current: &BePoint, extrap: &[BePoint]) -> DMatrix<f64> {
    let l = gamma.nrows();
    let mut info = DMatrix::zeros(l, l);
    info.ger(
        gains.eta_c1 / (current.rho * current.rho),
        &current.omega,
        &current.omega,
        1.0,
    );
    let w = extrapolation_weight(gains, extrap);
    for p in extrap {
        info.ger(w / (p.rho * p.rho), &p.omega, &p.omega, 1.0);
    }
    gamma * gains.beta - gamma * info * gamma
}

/// `Ŵ̇a = −η_a1(Ŵa − Ŵc) − η_a2 Ŵa + (η_c1/4ρ) Gσᵀ Ŵa (ωᵀŴc) + Σ (η_c2/4Nρ_i) Gσiᵀ Ŵa (ω_iᵀŴc)`
pub fn actor_rhs(
    gains: &AdpGains,
    w_actor: &DVector<f64>,
    w_critic: &DVector<f64>,
    current: &BePoint,
    extrap: &[BePoint],
) -> DVector<f64> {
    let mut out = (w_actor - w_critic) * -gains.eta_a1 - w_actor * gains.eta_a2;
    let scale = gains.eta_c1 * current.omega.dot(w_critic) / (4.0 * current.rho);
    out += current.g_sigma.tr_mul(w_actor) * scale;
    let w = extrapolation_weight(gains, extrap);
    for p in extrap {
        let scale = w * p.omega.dot(w_critic) / (4.0 * p.rho);
        out += p.g_sigma.tr_mul(w_actor) * scale;
    }
    out
}

/// `û(x) = −½ R⁻¹ gᵀ(x) ∇σ(x, c(x))ᵀ Ŵa`
pub fn policy<S: ControlAffine>(
    basis: &StafBasis,
    system: &S,
    cost: &CostSpec,
    x: &DVector<f64>,
    w_actor: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("actor weights", w_actor, basis.num_kernels())?;
    let grad = basis.grad_sigma(x)?;
    let g = system.effectiveness(x)?;
    Ok(cost.control_weight_inv() * g.transpose() * grad.transpose() * w_actor * -0.5)
}

/// `V̂(x) = Ŵcᵀ σ(x, c(x))`
pub fn value_estimate(basis: &StafBasis, x: &DVector<f64>, w_critic: &DVector<f64>) -> Result<f64> {
    check_len("critic weights", w_critic, basis.num_kernels())?;
    Ok(w_critic.dot(&basis.sigma(x)?))
}

/// Eigenvalue envelope `[lower, upper]` guaranteed for the gain matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBounds {
    pub lower: f64,
    pub upper: f64,
}

impl GammaBounds {
    pub fn contains(&self, eig: f64, rel_slack: f64) -> bool {
        eig >= self.lower * (1.0 - rel_slack) && eig <= self.upper * (1.0 + rel_slack)
    }
}

/// Bounds on the eigenvalues of Γ implied by the excitation constants.
///
/// `gamma0_min_eig`/`gamma0_max_eig` are the extreme eigenvalues of Γ(0).
pub fn gamma_bounds(
    gains: &AdpGains,
    gamma0_min_eig: f64,
    gamma0_max_eig: f64,
    pe: &PeEstimate,
) -> Result<GammaBounds> {
    if !(gamma0_min_eig > 0.0 && gamma0_max_eig >= gamma0_min_eig) {
        return Err(StafError::Contract(format!(
            "initial gain eigenvalues must satisfy 0 < min <= max, got [{gamma0_min_eig}, {gamma0_max_eig}]"
        )));
    }
    let inv_min = 1.0 / gamma0_max_eig;
    let inv_max = 1.0 / gamma0_min_eig;
    let t = pe.window_t;
    let excitation =
        gains.eta_c1 * pe.c1_hat + gains.eta_c2 * (pe.c2_hat * t).max(pe.c3_hat);
    let upper_den = excitation.min(inv_min) * (-gains.beta * t).exp();
    let lower_den = inv_max + (gains.eta_c1 + gains.eta_c2) / (gains.beta * gains.nu);
    if !(upper_den > 0.0) || !(lower_den > 0.0) || !lower_den.is_finite() {
        return Err(StafError::NumericRange(format!(
            "gain bound denominators must be positive (upper {upper_den}, lower {lower_den})"
        )));
    }
    Ok(GammaBounds {
        lower: 1.0 / lower_den,
        upper: 1.0 / upper_den,
    })
}

/// Lower eigenvalue bound of Γ alone; it needs no excitation estimate.
pub fn gamma_lower_bound(gains: &AdpGains, gamma0_min_eig: f64) -> Result<f64> {
    if !(gamma0_min_eig > 0.0) {
        return Err(StafError::Contract(format!(
            "initial gain eigenvalues must be positive, got {gamma0_min_eig}"
        )));
    }
    Ok(1.0 / (1.0 / gamma0_min_eig + (gains.eta_c1 + gains.eta_c2) / (gains.beta * gains.nu)))
}
