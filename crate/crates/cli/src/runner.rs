use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use staf_core::adp::gamma_lower_bound;
use staf_core::excitation::excitation_report;
use staf_core::report::csv_string;
use staf_core::sim::{metrics, run_regulation, run_tracking, Trajectory};
use staf_core::StafError;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "effective_config.json";

pub fn csv_name(kind: ExperimentKind, seed: u64) -> String {
    format!("{}_seed{seed}.csv", kind.name())
}

/// What happened to one seed.
#[derive(Debug, Clone)]
pub enum SeedOutcome {
    Completed { seed: u64, record: Map<String, Value> },
    Aborted { seed: u64, time: Option<f64>, message: String },
}

impl SeedOutcome {
    pub fn seed(&self) -> u64 {
        match self {
            SeedOutcome::Completed { seed, .. } | SeedOutcome::Aborted { seed, .. } => *seed,
        }
    }
}

/// Everything `run` produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub outcomes: Vec<SeedOutcome>,
    pub summary: Map<String, Value>,
}

impl RunOutput {
    pub fn failed(&self) -> impl Iterator<Item = &SeedOutcome> {
        self.outcomes.iter().filter(|o| matches!(o, SeedOutcome::Aborted { .. }))
    }
}

fn simulate(config: &ExperimentConfig, seed: u64) -> staf_core::Result<Trajectory> {
    let sim = config.sim_config(seed);
    match config.experiment {
        ExperimentKind::Regulation => run_regulation(&sim, &config.regulation()?),
        ExperimentKind::Tracking => run_tracking(&sim, &config.tracking()?),
    }
}

/// Metrics and excitation diagnostics for one completed run, as flat keys.
fn seed_record(config: &ExperimentConfig, traj: &Trajectory) -> staf_core::Result<Map<String, Value>> {
    let m = metrics(traj, config.steady_window())?;
    let mut rec = Map::new();
    rec.insert("total_cost".into(), json!(m.total_cost));
    rec.insert("steady_state_rms".into(), json!(m.steady_state_rms));
    rec.insert("final_error_norm".into(), json!(m.final_error_norm));
    rec.insert("final_time".into(), json!(traj.final_time()));
    if let Some(v) = traj.value_error.last() {
        rec.insert("final_value_error".into(), json!(v));
    }
    if let Some(theta) = traj.theta.last() {
        let truth = staf_core::sysid::benchmark_theta();
        rec.insert("final_theta_error".into(), json!((theta - truth).norm()));
    }

    let d = &traj.diagnostics;
    rec.insert("integrator_steps".into(), json!(d.integrator_steps));
    rec.insert("integrator_rejections".into(), json!(d.integrator_rejections));
    rec.insert("gamma_projection_events".into(), json!(d.gamma_projection_events));
    rec.insert("bellman_error_identity_gap".into(), json!(d.be_identity_max_gap));

    let window = config.diagnostics.pe_window;
    let gains = config.adp_gains();
    let l = config.initial.w_critic.len();
    let gamma0 = nalgebra::DMatrix::identity(l, l) * config.initial.gamma0;
    if d.regressors.len() < (window / config.sim.dt).round() as usize {
        rec.insert("pe.status".into(), json!("not measured: run shorter than the window"));
        return Ok(rec);
    }
    let report = excitation_report(&gains, &gamma0, &d.regressors, &d.proxies, window, config.sim.dt)?;
    rec.insert("pe.status".into(), json!("measured"));
    rec.insert("pe.window".into(), json!(report.pe.window_t));
    rec.insert("pe.c1_hat".into(), json!(report.pe.c1_hat));
    rec.insert("pe.c2_hat".into(), json!(report.pe.c2_hat));
    rec.insert("pe.c3_hat".into(), json!(report.pe.c3_hat));
    rec.insert("gamma.lower_bound".into(), json!(report.gamma_lower));
    if let Some(b) = report.bounds {
        rec.insert("gamma.upper_bound".into(), json!(b.upper));
    }
    let (lo, hi) = traj
        .gamma_eigs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(*a), hi.max(*b)));
    rec.insert("gamma.observed_min".into(), json!(lo));
    rec.insert("gamma.observed_max".into(), json!(hi));
    if let Some(s) = report.sufficient {
        rec.insert("sufficient.c_bar".into(), json!(s.c_bar));
        rec.insert("sufficient.critic_lhs".into(), json!(s.critic_lhs));
        rec.insert("sufficient.critic_rhs".into(), json!(s.critic_rhs));
        rec.insert("sufficient.critic_satisfied".into(), json!(s.critic_satisfied));
        rec.insert("sufficient.actor_lhs".into(), json!(s.actor_lhs));
        rec.insert("sufficient.actor_rhs".into(), json!(s.actor_rhs));
        rec.insert("sufficient.actor_satisfied".into(), json!(s.actor_satisfied));
    }
    Ok(rec)
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    fs::write(path, csv_string(traj)).map_err(|e| CliError::io(path, e))
}

fn run_seed(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<SeedOutcome, CliError> {
    let traj = match simulate(config, seed) {
        Ok(t) => t,
        Err(StafError::Diverged { time, source }) => {
            return Ok(SeedOutcome::Aborted {
                seed,
                time: Some(time),
                message: source.to_string(),
            })
        }
        Err(e @ StafError::NumericRange(_)) => {
            return Ok(SeedOutcome::Aborted {
                seed,
                time: None,
                message: e.to_string(),
            })
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory(&out_dir.join(csv_name(config.experiment, seed)), &traj)?;
    Ok(SeedOutcome::Completed {
        seed,
        record: seed_record(config, &traj)?,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(config: &ExperimentConfig, outcomes: &[SeedOutcome]) -> Map<String, Value> {
    let mut s = Map::new();
    s.insert("experiment".into(), json!(config.experiment.name()));
    s.insert("seeds".into(), json!(outcomes.len()));
    s.insert("duration".into(), json!(config.sim.duration));
    s.insert("dt".into(), json!(config.sim.dt));
    s.insert("steady_window".into(), json!(config.steady_window()));

    let mut completed = Vec::new();
    let mut aborted = Vec::new();
    for o in outcomes {
        let prefix = format!("seed_{}", o.seed());
        match o {
            SeedOutcome::Completed { record, .. } => {
                completed.push(record);
                s.insert(format!("{prefix}.status"), json!("completed"));
                for (k, v) in record {
                    s.insert(format!("{prefix}.{k}"), v.clone());
                }
            }
            SeedOutcome::Aborted { time, message, .. } => {
                aborted.push(o.seed());
                s.insert(format!("{prefix}.status"), json!("aborted"));
                if let Some(t) = time {
                    s.insert(format!("{prefix}.aborted_at"), json!(t));
                }
                s.insert(format!("{prefix}.error"), json!(message));
            }
        }
    }
    s.insert("seeds_completed".into(), json!(completed.len()));
    s.insert("seeds_aborted".into(), json!(aborted.len()));

    for key in ["total_cost", "steady_state_rms"] {
        let xs: Vec<f64> = completed.iter().filter_map(|r| r.get(key)?.as_f64()).collect();
        if !xs.is_empty() {
            let (mean, std) = mean_std(&xs);
            s.insert(format!("{key}.mean"), json!(mean));
            s.insert(format!("{key}.stddev"), json!(std));
        }
    }
    s
}

fn write_json(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Validate, run every seed in parallel, and write per-seed CSVs,
/// `summary.json` and `effective_config.json` to `out_dir`.
///
/// Aborted seeds do not stop the others; they are listed in the summary
/// and the returned output, and the caller decides how to report them.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_json(&out_dir.join(CONFIG_FILE), &config.to_json())?;

    let outcomes = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed, out_dir))
        .collect::<Result<Vec<_>, _>>()?;

    let summary = summarize(config, &outcomes);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_json(&out_dir.join(SUMMARY_FILE), &text)?;
    Ok(RunOutput {
        out_dir: out_dir.to_path_buf(),
        outcomes,
        summary,
    })
}

/// The validation report printed by `check`.
pub fn check(config: &ExperimentConfig) -> Result<String, CliError> {
    config.validate()?;
    let gains = config.adp_gains();
    let lower = gamma_lower_bound(&gains, config.initial.gamma0)?;
    let mut out = String::from("valid\n");
    out.push_str(&format!("experiment: {}\n", config.experiment.name()));
    out.push_str(&format!("kernels: {}\n", config.initial.w_critic.len()));
    out.push_str(&format!("extrapolation points: {}\n", gains.num_extrap));
    out.push_str(&format!("gamma lower bound: {lower:.4e}\n"));
    out.push_str("gamma upper bound: needs measured excitation (c3_hat > 0)\n");
    out.push_str("excitation: c1_hat = ?, c2_hat = ?, c3_hat = ? (measured by `run`)\n");
    out.push_str(&format!("excitation window: {} s\n", config.diagnostics.pe_window));
    Ok(out)
}
