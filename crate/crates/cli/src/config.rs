//! Experiment configuration file.
//!
//! A config is a JSON object. Every field is optional; missing fields take
//! the defaults of the chosen experiment, so `{}` describes the regulation
//! experiment in full. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use staf_core::adp::{AdpGains, AdpState};
use staf_core::dynamics::{regulation_benchmark, CostSpec, TrackingProblem};
use staf_core::excitation::{ExtrapolationKind, ExtrapolationPolicy};
use staf_core::kernel::{ShrinkFunction, StafBasis};
use staf_core::ode::Integrator;
use staf_core::sim::{RegulationExperiment, SimConfig, TrackingExperiment, TRACKING_SIMPLEX_SCALE};
use staf_core::sysid::{benchmark_theta, IdentifierGains, LinearDriftModel};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Regulation,
    Tracking,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Regulation => "regulation",
            ExperimentKind::Tracking => "tracking",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum IntegratorConfig {
    Rk4 { substeps: usize },
    Euler { substeps: usize },
    Dopri5 { rtol: f64, atol: f64 },
}

impl From<IntegratorConfig> for Integrator {
    fn from(c: IntegratorConfig) -> Self {
        match c {
            IntegratorConfig::Rk4 { substeps } => Integrator::Rk4 { substeps },
            IntegratorConfig::Euler { substeps } => Integrator::Euler { substeps },
            IntegratorConfig::Dopri5 { rtol, atol } => Integrator::Dopri5 { rtol, atol },
        }
    }
}

impl From<Integrator> for IntegratorConfig {
    fn from(i: Integrator) -> Self {
        match i {
            Integrator::Rk4 { substeps } => IntegratorConfig::Rk4 { substeps },
            Integrator::Euler { substeps } => IntegratorConfig::Euler { substeps },
            Integrator::Dopri5 { rtol, atol } => IntegratorConfig::Dopri5 { rtol, atol },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub duration: f64,
    pub record_stride: usize,
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub eta_c1: f64,
    pub eta_c2: f64,
    pub eta_a1: f64,
    pub eta_a2: f64,
    pub beta: f64,
    pub nu: f64,
}

/// Kernel geometry. `eps0` and `nu2` shape the shrinking triangle and only
/// apply to regulation; tracking uses a fixed-size simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrapolationKindConfig {
    UniformBox,
    FixedGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolationSection {
    pub kind: ExtrapolationKindConfig,
    pub half_width_factor: f64,
    pub num_points: usize,
    pub resample_every_step: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    /// Diagonal of the state (or tracking-error) weight.
    pub q_diag: Vec<f64>,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x0: Vec<f64>,
    pub w_critic: Vec<f64>,
    pub w_actor: Vec<f64>,
    /// `Γ(0) = gamma0 · I`.
    pub gamma0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSection {
    pub desired_initial: Vec<f64>,
    /// Initial drift parameters, 3 × 2 row-major.
    pub theta0: Vec<f64>,
    pub observer_gain: f64,
    pub k_theta: f64,
    /// Diagonal of the parameter adaptation gain.
    pub gamma_theta: Vec<f64>,
    pub stack_capacity: usize,
    pub derivative_window: usize,
    pub stack_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Window length of the excitation integrals, seconds.
    pub pe_window: f64,
    /// Steady-state window for the RMS metric; defaults to the final 20%.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub sim: SimSection,
    pub gains: GainsSection,
    pub basis: BasisSection,
    pub extrapolation: ExtrapolationSection,
    pub cost: CostSection,
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingSection>,
    pub diagnostics: DiagnosticsSection,
}

fn gains_section(g: &AdpGains) -> GainsSection {
    GainsSection {
        eta_c1: g.eta_c1,
        eta_c2: g.eta_c2,
        eta_a1: g.eta_a1,
        eta_a2: g.eta_a2,
        beta: g.beta,
        nu: g.nu,
    }
}

fn extrapolation_section(p: &ExtrapolationPolicy) -> ExtrapolationSection {
    ExtrapolationSection {
        kind: match p.kind {
            ExtrapolationKind::UniformBox => ExtrapolationKindConfig::UniformBox,
            ExtrapolationKind::FixedGrid => ExtrapolationKindConfig::FixedGrid,
        },
        half_width_factor: p.half_width_factor,
        num_points: p.num_points,
        resample_every_step: p.resample_every_step,
    }
}

fn sim_section(s: &SimConfig) -> SimSection {
    SimSection {
        dt: s.dt,
        duration: s.duration,
        record_stride: s.record_stride,
        integrator: s.integrator.into(),
    }
}

fn diag(m: &DMatrix<f64>) -> Vec<f64> {
    m.diagonal().iter().copied().collect()
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let diagnostics = DiagnosticsSection {
            pe_window: 1.0,
            steady_window: None,
        };
        match kind {
            ExperimentKind::Regulation => {
                let exp = RegulationExperiment::benchmark_defaults();
                let shrink = exp.basis.shrink();
                ExperimentConfig {
                    experiment: kind,
                    seeds: vec![1],
                    output_dir: None,
                    sim: sim_section(&SimConfig::regulation_defaults()),
                    gains: gains_section(&exp.gains),
                    basis: BasisSection {
                        scale: shrink.scale,
                        eps0: Some(shrink.eps0),
                        nu2: Some(shrink.nu2),
                    },
                    extrapolation: extrapolation_section(&exp.policy),
                    cost: CostSection {
                        q_diag: diag(exp.cost.state_weight()),
                        r: exp.cost.control_weight()[(0, 0)],
                    },
                    initial: InitialSection {
                        x0: exp.x0.iter().copied().collect(),
                        w_critic: exp.initial.w_critic.iter().copied().collect(),
                        w_actor: exp.initial.w_actor.iter().copied().collect(),
                        gamma0: exp.initial.gamma[(0, 0)],
                    },
                    tracking: None,
                    diagnostics,
                }
            }
            ExperimentKind::Tracking => {
                let exp = TrackingExperiment::benchmark_defaults();
                ExperimentConfig {
                    experiment: kind,
                    seeds: vec![1],
                    output_dir: None,
                    sim: sim_section(&SimConfig::tracking_defaults()),
                    gains: gains_section(&exp.gains),
                    basis: BasisSection {
                        scale: TRACKING_SIMPLEX_SCALE,
                        eps0: None,
                        nu2: None,
                    },
                    extrapolation: extrapolation_section(&exp.policy),
                    cost: CostSection {
                        q_diag: diag(&exp.problem.error_weight),
                        r: exp.problem.control_weight[(0, 0)],
                    },
                    initial: InitialSection {
                        x0: exp.x0.iter().copied().collect(),
                        w_critic: exp.initial.w_critic.iter().copied().collect(),
                        w_actor: exp.initial.w_actor.iter().copied().collect(),
                        gamma0: exp.initial.gamma[(0, 0)],
                    },
                    tracking: Some(TrackingSection {
                        desired_initial: exp.problem.desired_initial.iter().copied().collect(),
                        theta0: exp.theta0.transpose().iter().copied().collect(),
                        observer_gain: exp.identifier.k,
                        k_theta: exp.identifier.k_theta,
                        gamma_theta: diag(&exp.identifier.gamma_theta),
                        stack_capacity: exp.stack_capacity,
                        derivative_window: exp.derivative_window,
                        stack_interval: exp.stack_interval,
                    }),
                    diagnostics,
                }
            }
        }
    }

    /// Parse a config document, filling gaps with the defaults of its
    /// experiment. `forced` overrides the document's experiment choice and
    /// must agree with it when both are present.
    pub fn from_json(text: &str, forced: Option<ExperimentKind>) -> Result<Self, CliError> {
        let user: Value = if text.trim().is_empty() {
            Value::Object(Map::new())
        } else {
            serde_json::from_str(text).map_err(|e| CliError::validation(format!("config is not valid JSON: {e}")))?
        };
        let Value::Object(user) = user else {
            return Err(CliError::validation("config must be a JSON object"));
        };
        let declared = match user.get("experiment") {
            None => None,
            Some(v) => Some(
                serde_json::from_value::<ExperimentKind>(v.clone())
                    .map_err(|e| CliError::validation(format!("experiment: {e}")))?,
            ),
        };
        let kind = match (forced, declared) {
            (Some(f), Some(d)) if f != d => {
                return Err(CliError::validation(format!(
                    "experiment given as {} on the command line but {} in the config",
                    f.name(),
                    d.name()
                )))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => ExperimentKind::Regulation,
        };
        let mut merged = serde_json::to_value(Self::defaults(kind)).expect("defaults serialize");
        merge(&mut merged, Value::Object(user));
        serde_json::from_value(merged).map_err(|e| CliError::validation(e.to_string()))
    }

    pub fn from_file(path: &Path, forced: Option<ExperimentKind>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, forced)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt: self.sim.dt,
            duration: self.sim.duration,
            integrator: self.sim.integrator.clone().into(),
            seed,
            record_stride: self.sim.record_stride,
        }
    }

    pub fn adp_gains(&self) -> AdpGains {
        let g = &self.gains;
        AdpGains {
            eta_c1: g.eta_c1,
            eta_c2: g.eta_c2,
            eta_a1: g.eta_a1,
            eta_a2: g.eta_a2,
            beta: g.beta,
            nu: g.nu,
            num_extrap: self.extrapolation.num_points,
        }
    }

    pub fn extrapolation_policy(&self) -> ExtrapolationPolicy {
        let e = &self.extrapolation;
        ExtrapolationPolicy {
            kind: match e.kind {
                ExtrapolationKindConfig::UniformBox => ExtrapolationKind::UniformBox,
                ExtrapolationKindConfig::FixedGrid => ExtrapolationKind::FixedGrid,
            },
            half_width_factor: e.half_width_factor,
            num_points: e.num_points,
            resample_every_step: e.resample_every_step,
        }
    }

    pub fn steady_window(&self) -> f64 {
        self.diagnostics.steady_window.unwrap_or(0.2 * self.sim.duration)
    }

    /// Every problem with the config, with the offending field named.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                out.push(msg);
            }
        };
        if self.seeds.is_empty() {
            need(false, "seeds must list at least one seed".into());
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            need(false, format!("seeds: {dup} listed twice"));
        }
        let seed = self.seeds.first().copied().unwrap_or(0);
        if let Err(e) = self.sim_config(seed).num_steps() {
            need(false, format!("sim: {e}"));
        }
        for v in self.adp_gains().violations() {
            let msg = if v.starts_with("num_extrap") {
                "extrapolation.num_points must be at least 1".to_string()
            } else {
                format!("gains.{v}")
            };
            need(false, msg);
        }
        if self.extrapolation.num_points > 0 {
            if let Err(e) = self.extrapolation_policy().validate(self.basis_dimension()) {
                need(false, format!("extrapolation: {e}"));
            }
        }

        let n = 2;
        let l = self.num_kernels();
        need(
            self.cost.q_diag.len() == n,
            format!("cost.q_diag must have {n} entries, got {}", self.cost.q_diag.len()),
        );
        need(
            self.cost.q_diag.iter().all(|q| *q >= 0.0 && q.is_finite()),
            "cost.q_diag entries must be nonnegative".into(),
        );
        need(self.cost.r > 0.0 && self.cost.r.is_finite(), format!("cost.r must be positive definite, got {}", self.cost.r));
        need(
            self.initial.x0.len() == n,
            format!("initial.x0 must have {n} entries, got {}", self.initial.x0.len()),
        );
        need(
            self.initial.w_critic.len() == l,
            format!("initial.w_critic must have {l} entries (one per kernel), got {}", self.initial.w_critic.len()),
        );
        need(
            self.initial.w_actor.len() == l,
            format!("initial.w_actor must have {l} entries (one per kernel), got {}", self.initial.w_actor.len()),
        );
        need(
            self.initial.gamma0 > 0.0 && self.initial.gamma0.is_finite(),
            format!("initial.gamma0 must be positive, got {}", self.initial.gamma0),
        );
        need(
            self.diagnostics.pe_window > 0.0,
            format!("diagnostics.pe_window must be positive, got {}", self.diagnostics.pe_window),
        );
        if let Some(w) = self.diagnostics.steady_window {
            need(
                (0.0..=self.sim.duration).contains(&w),
                format!("diagnostics.steady_window must lie in [0, duration], got {w}"),
            );
        }
        if let Err(e) = self.basis() {
            need(false, format!("basis: {e}"));
        }

        match (self.experiment, &self.tracking) {
            (ExperimentKind::Regulation, Some(_)) => {
                need(false, "tracking section is only valid for the tracking experiment".into())
            }
            (ExperimentKind::Tracking, None) => need(false, "tracking section is required".into()),
            (ExperimentKind::Tracking, Some(t)) => {
                need(
                    self.basis.eps0.is_none() && self.basis.nu2.is_none(),
                    "basis.eps0 and basis.nu2 only apply to regulation".into(),
                );
                need(
                    t.desired_initial.len() == n,
                    format!("tracking.desired_initial must have {n} entries"),
                );
                need(t.theta0.len() == 6, format!("tracking.theta0 must have 6 entries, got {}", t.theta0.len()));
                need(t.observer_gain > 0.0, "tracking.observer_gain must be positive".into());
                need(t.k_theta >= 0.0, "tracking.k_theta must be nonnegative".into());
                need(
                    t.gamma_theta.len() == 3 && t.gamma_theta.iter().all(|g| *g > 0.0),
                    "tracking.gamma_theta must have 3 positive entries".into(),
                );
                need(t.stack_capacity >= 1, "tracking.stack_capacity must be at least 1".into());
                need(
                    t.derivative_window % 2 == 1 && t.derivative_window > 5,
                    format!("tracking.derivative_window must be odd and above 5, got {}", t.derivative_window),
                );
                need(t.stack_interval >= 1, "tracking.stack_interval must be at least 1".into());
            }
            (ExperimentKind::Regulation, None) => {}
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(v))
        }
    }

    fn basis_dimension(&self) -> usize {
        match self.experiment {
            ExperimentKind::Regulation => 2,
            ExperimentKind::Tracking => 4,
        }
    }

    fn num_kernels(&self) -> usize {
        self.basis_dimension() + 1
    }

    pub fn basis(&self) -> staf_core::Result<StafBasis> {
        match self.experiment {
            ExperimentKind::Regulation => {
                let template = StafBasis::regulation_triangle(1.0);
                let shrink = ShrinkFunction::shrinking(
                    self.basis.eps0.unwrap_or(0.01),
                    self.basis.nu2.unwrap_or(1.0),
                    self.basis.scale,
                );
                StafBasis::new(2, template.offsets().to_vec(), shrink)
            }
            ExperimentKind::Tracking => StafBasis::simplex(4, self.basis.scale),
        }
    }

    fn cost_spec(&self) -> staf_core::Result<CostSpec> {
        CostSpec::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(&self.cost.q_diag)),
            DMatrix::from_element(1, 1, self.cost.r),
        )
    }

    fn adp_state(&self) -> AdpState {
        let l = self.num_kernels();
        AdpState {
            w_critic: DVector::from_column_slice(&self.initial.w_critic),
            w_actor: DVector::from_column_slice(&self.initial.w_actor),
            gamma: DMatrix::identity(l, l) * self.initial.gamma0,
        }
    }

    /// Call after [`validate`](Self::validate).
    pub fn regulation(&self) -> staf_core::Result<RegulationExperiment> {
        let (plant, default_cost, solution) = regulation_benchmark();
        let cost = self.cost_spec()?;
        // The closed-form solution belongs to the default cost only.
        let solution = (cost == default_cost).then_some(solution);
        Ok(RegulationExperiment {
            plant,
            cost,
            solution,
            basis: self.basis()?,
            gains: self.adp_gains(),
            policy: self.extrapolation_policy(),
            x0: DVector::from_column_slice(&self.initial.x0),
            initial: self.adp_state(),
        })
    }

    /// Call after [`validate`](Self::validate).
    pub fn tracking(&self) -> staf_core::Result<TrackingExperiment> {
        let t = self.tracking.as_ref().ok_or_else(|| {
            staf_core::StafError::Config("tracking section is required".into())
        })?;
        let truth = benchmark_theta();
        let plant = LinearDriftModel::new(truth.clone())?.with_truth(truth);
        let mut problem = TrackingProblem::benchmark(plant);
        problem.desired_initial = DVector::from_column_slice(&t.desired_initial);
        problem.error_weight = DMatrix::from_diagonal(&DVector::from_column_slice(&self.cost.q_diag));
        problem.control_weight = DMatrix::from_element(1, 1, self.cost.r);
        Ok(TrackingExperiment {
            problem,
            basis: self.basis()?,
            gains: self.adp_gains(),
            policy: self.extrapolation_policy(),
            x0: DVector::from_column_slice(&self.initial.x0),
            x_hat0: DVector::from_column_slice(&self.initial.x0),
            theta0: DMatrix::from_row_slice(3, 2, &t.theta0),
            initial: self.adp_state(),
            identifier: IdentifierGains {
                k: t.observer_gain,
                k_theta: t.k_theta,
                gamma_theta: DMatrix::from_diagonal(&DVector::from_column_slice(&t.gamma_theta)),
            },
            stack_capacity: t.stack_capacity,
            derivative_window: t.derivative_window,
            stack_interval: t.stack_interval,
        })
    }
}

/// Overlay `patch` onto `base`. Objects merge key by key; anything else
/// replaces. The integrator is replaced whole since its fields depend on
/// the method.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if k != "integrator" => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
