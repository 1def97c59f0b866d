use crate::error::{Result, StafError};

use super::Trajectory;

/// Headline numbers of a run: total cost and steady-state RMS error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub total_cost: f64,
    pub steady_state_rms: f64,
    pub steady_window: f64,
    pub final_error_norm: f64,
}

/// Root-mean-square of `values` over samples with `t >= from`.
pub fn rms_over(times: &[f64], values: impl IntoIterator<Item = f64>, from: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, v) in times.iter().zip(values) {
        // Small slack so a window edge landing on a grid point is included.
        if *t >= from - 1e-9 {
            sum += v * v;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

pub fn metrics(trajectory: &Trajectory, steady_window: f64) -> Result<Metrics> {
    let end = trajectory.final_time();
    if !(steady_window >= 0.0) || steady_window > end + 1e-9 {
        return Err(StafError::Contract(format!(
            "steady window {steady_window} exceeds run length {end}"
        )));
    }
    if trajectory.is_empty() {
        return Ok(Metrics {
            total_cost: 0.0,
            steady_state_rms: 0.0,
            steady_window,
            final_error_norm: 0.0,
        });
    }
    let norms = (0..trajectory.len()).map(|k| trajectory.error_norm(k));
    let last = trajectory.len() - 1;
    Ok(Metrics {
        total_cost: trajectory.accumulated_cost[last],
        steady_state_rms: rms_over(&trajectory.times, norms, end - steady_window),
        steady_window,
        final_error_norm: trajectory.error_norm(last),
    })
}
