//! Extrapolation-point generation and empirical excitation diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::adp::{gamma_bounds, AdpGains, GammaBounds};
use crate::error::{Result, StafError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrapolationKind {
    /// `N` points drawn uniformly from the box around the state.
    UniformBox,
    /// `N = k^n` points on a fixed `k`-per-axis grid spanning the box.
    FixedGrid,
}

/// How the extrapolation points `x_i = x + a_i` are chosen.
///
/// The box half-width is `half_width_factor · shrink(x) / 2`; with a
/// constant-one shrink function that is simply `half_width_factor / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationPolicy {
    pub kind: ExtrapolationKind,
    pub half_width_factor: f64,
    pub num_points: usize,
    pub resample_every_step: bool,
}

impl ExtrapolationPolicy {
    /// One point, uniform over a `2.1 × shrink(x)` box, redrawn every step.
    pub fn single_uniform() -> Self {
        ExtrapolationPolicy {
            kind: ExtrapolationKind::UniformBox,
            half_width_factor: 2.1,
            num_points: 1,
            resample_every_step: true,
        }
    }

    pub fn half_width(&self, shrink_value: f64) -> f64 {
        self.half_width_factor * shrink_value / 2.0
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.num_points == 0 {
            return Err(StafError::Config("extrapolation needs at least one point".into()));
        }
        if !(self.half_width_factor >= 0.0 && self.half_width_factor.is_finite()) {
            return Err(StafError::Config(format!(
                "extrapolation half_width_factor must be nonnegative, got {}",
                self.half_width_factor
            )));
        }
        if self.kind == ExtrapolationKind::FixedGrid {
            grid_side(self.num_points, dimension)?;
        }
        Ok(())
    }

    /// Offsets normalized to the unit box `[-1, 1]^n`. The caller scales them
    /// by [`half_width`](Self::half_width) at the state where they are used.
    pub fn unit_offsets(&self, dimension: usize, rng: &mut ChaCha8Rng) -> Result<Vec<DVector<f64>>> {
        match self.kind {
            ExtrapolationKind::UniformBox => Ok((0..self.num_points)
                .map(|_| DVector::from_fn(dimension, |_, _| rng.gen_range(-1.0..=1.0)))
                .collect()),
            ExtrapolationKind::FixedGrid => {
                let side = grid_side(self.num_points, dimension)?;
                Ok(grid_points(side, dimension))
            }
        }
    }
}

fn grid_side(num_points: usize, dimension: usize) -> Result<usize> {
    let side = (num_points as f64).powf(1.0 / dimension as f64).round() as usize;
    if side == 0 || side.checked_pow(dimension as u32) != Some(num_points) {
        return Err(StafError::Config(format!(
            "fixed grid needs a perfect {dimension}-th power of points, got {num_points}"
        )));
    }
    Ok(side)
}

fn grid_points(side: usize, dimension: usize) -> Vec<DVector<f64>> {
    let coord = |k: usize| {
        if side == 1 {
            0.0
        } else {
            -1.0 + 2.0 * k as f64 / (side - 1) as f64
        }
    };
    let total = side.pow(dimension as u32);
    (0..total)
        .map(|mut idx| {
            DVector::from_fn(dimension, |_, _| {
                let k = idx % side;
                idx /= side;
                coord(k)
            })
        })
        .collect()
}

/// Map unit offsets to points in the box around `x`.
pub fn place_points(x: &DVector<f64>, unit_offsets: &[DVector<f64>], half_width: f64) -> Vec<DVector<f64>> {
    unit_offsets.iter().map(|a| x + a * half_width).collect()
}

/// Draw `N` extrapolation points around `x`. Deterministic for a given
/// generator state.
pub fn sample_points(
    policy: &ExtrapolationPolicy,
    x: &DVector<f64>,
    shrink_value: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DVector<f64>>> {
    let offsets = policy.unit_offsets(x.len(), rng)?;
    Ok(place_points(x, &offsets, policy.half_width(shrink_value)))
}

/// Empirical lower bounds on the excitation integrals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeEstimate {
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub c3_hat: f64,
    pub window_t: f64,
}

impl PeEstimate {
    pub fn satisfied(&self) -> bool {
        self.c1_hat > 0.0 || self.c2_hat > 0.0 || self.c3_hat > 0.0
    }
}

/// Normalized regressors recorded at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSample {
    /// `ω/ρ` on the trajectory.
    pub current: DVector<f64>,
    /// `ω_i/ρ_i` at the extrapolation points.
    pub extrapolated: Vec<DVector<f64>>,
}

fn outer_sum<'a, I: IntoIterator<Item = &'a DVector<f64>>>(dim: usize, vs: I, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for v in vs {
        m.ger(scale, v, v, 1.0);
    }
    m
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Estimate the excitation constants from samples taken every `dt` seconds.
///
/// `c1` and `c3` are the smallest eigenvalue of the left Riemann sum over
/// every length-`T` window; `c2` is the smallest pointwise eigenvalue of
/// the averaged extrapolated outer product. Negative round-off is clamped
/// to zero.
pub fn pe_windows(samples: &[RegressorSample], window_t: f64, dt: f64) -> Result<PeEstimate> {
    if !(dt > 0.0) || !(window_t > 0.0) {
        return Err(StafError::Contract(format!(
            "window ({window_t}) and step ({dt}) must be positive"
        )));
    }
    let steps = (window_t / dt).round() as usize;
    if steps == 0 || steps > samples.len() {
        return Err(StafError::Contract(format!(
            "window of {steps} samples exceeds the {} recorded",
            samples.len()
        )));
    }
    let dim = samples[0].current.len();

    let current: Vec<DMatrix<f64>> = samples
        .iter()
        .map(|s| outer_sum(dim, std::iter::once(&s.current), 1.0))
        .collect();
    let extrap: Vec<DMatrix<f64>> = samples
        .iter()
        .map(|s| {
            if s.extrapolated.is_empty() {
                DMatrix::zeros(dim, dim)
            } else {
                outer_sum(dim, &s.extrapolated, 1.0 / s.extrapolated.len() as f64)
            }
        })
        .collect();

    let c2_hat = extrap.iter().map(min_eig).fold(f64::INFINITY, f64::min);
    let c1_hat = windowed_min_eig(&current, steps, dt);
    let c3_hat = windowed_min_eig(&extrap, steps, dt);

    Ok(PeEstimate {
        c1_hat: c1_hat.max(0.0),
        c2_hat: c2_hat.max(0.0),
        c3_hat: c3_hat.max(0.0),
        window_t,
    })
}

fn windowed_min_eig(terms: &[DMatrix<f64>], steps: usize, dt: f64) -> f64 {
    // Recompute the window sum periodically so the sliding update does not
    // accumulate cancellation error over long runs.
    const REFRESH: usize = 1024;
    let window_sum = |start: usize| {
        terms[start..start + steps]
            .iter()
            .fold(DMatrix::zeros(terms[0].nrows(), terms[0].ncols()), |acc, m| acc + m)
    };
    let mut sum = window_sum(0);
    let mut best = min_eig(&(&sum * dt));
    for start in 1..=(terms.len() - steps) {
        if start % REFRESH == 0 {
            sum = window_sum(start);
        } else {
            sum += &terms[start + steps - 1];
            sum -= &terms[start - 1];
        }
        best = best.min(min_eig(&(&sum * dt)));
    }
    best
}

/// `c̲ = β / (2 Γ̄ η_c2) + c2/2`.
pub fn min_eig_constant(gains: &AdpGains, bounds: &GammaBounds, pe: &PeEstimate) -> f64 {
    gains.beta / (2.0 * bounds.upper * gains.eta_c2) + pe.c2_hat / 2.0
}

/// Sup-norm stand-ins for the unknown ideal-weight quantities, gathered
/// from a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormProxies {
    /// `‖∇W g R⁻¹ gᵀ ∇σᵀ‖`
    pub g_w_sigma: f64,
    /// `‖Wᵀ Gσ‖`
    pub w_t_g_sigma: f64,
    /// `‖W‖`
    pub w: f64,
    /// `‖Gσ‖`
    pub g_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientConditionReport {
    pub c_bar: f64,
    pub critic_lhs: f64,
    pub critic_rhs: f64,
    pub critic_satisfied: bool,
    pub actor_lhs: f64,
    pub actor_rhs: f64,
    pub actor_satisfied: bool,
}

/// Evaluate the two gain inequalities of the stability analysis with proxy
/// norms. Advisory only: the true ideal weights are unknown.
pub fn sufficient_condition_report(
    gains: &AdpGains,
    proxies: &NormProxies,
    gamma_lower: f64,
    c_bar: f64,
) -> SufficientConditionReport {
    let sqrt_nu = gains.nu.sqrt();
    let eta_c = gains.eta_c1 + gains.eta_c2;
    let eta_a = gains.eta_a1 + gains.eta_a2;

    let critic_lhs = gains.eta_c2 * c_bar / 3.0;
    let inner = proxies.g_w_sigma / (2.0 * gamma_lower)
        + eta_c * proxies.w_t_g_sigma / (4.0 * sqrt_nu)
        + gains.eta_a1;
    let critic_rhs = inner * inner / eta_a;

    let actor_lhs = eta_a / 4.0;
    let actor_rhs = proxies.g_w_sigma / 2.0 + eta_c * proxies.w * proxies.g_sigma / (4.0 * sqrt_nu);

    SufficientConditionReport {
        c_bar,
        critic_lhs,
        critic_rhs,
        critic_satisfied: critic_lhs >= critic_rhs,
        actor_lhs,
        actor_rhs,
        actor_satisfied: actor_lhs >= actor_rhs,
    }
}

/// Everything the excitation diagnostics produce for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationReport {
    pub pe: PeEstimate,
    pub bounds: Option<GammaBounds>,
    pub gamma_lower: f64,
    pub sufficient: Option<SufficientConditionReport>,
}

pub fn excitation_report(
    gains: &AdpGains,
    gamma0: &DMatrix<f64>,
    samples: &[RegressorSample],
    proxies: &NormProxies,
    window_t: f64,
    dt: f64,
) -> Result<ExcitationReport> {
    let pe = pe_windows(samples, window_t, dt)?;
    let eig = gamma0.clone().symmetric_eigen().eigenvalues;
    let bounds = gamma_bounds(gains, eig.min(), eig.max(), &pe).ok();
    let gamma_lower = crate::adp::gamma_lower_bound(gains, eig.min())?;
    let sufficient = bounds.map(|b| {
        let c_bar = min_eig_constant(gains, &b, &pe);
        sufficient_condition_report(gains, proxies, gamma_lower, c_bar)
    });
    Ok(ExcitationReport {
        pe,
        bounds,
        gamma_lower,
        sufficient,
    })
}
