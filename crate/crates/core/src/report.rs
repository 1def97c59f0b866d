//! CSV serialization of trajectories.
//!
//! Columns are fixed: `t`, the state, the control, critic weights, actor
//! weights, `gamma_min`, `gamma_max`, `cost`, `value_error`, and for runs
//! with an identifier the drift parameters `theta_<row>_<col>` (row-major).
//! Numbers are written in decimal notation with 17 significant digits, so a
//! CSV round-trips every `f64`.

use std::io::Write;

use crate::sim::Trajectory;

fn indexed(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

fn width(samples: &[nalgebra::DVector<f64>]) -> usize {
    samples.first().map_or(0, |v| v.len())
}

pub fn csv_header(traj: &Trajectory) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(indexed("x", width(&traj.states)));
    cols.extend(indexed("u", width(&traj.controls)));
    cols.extend(indexed("wc", width(&traj.w_critic)));
    cols.extend(indexed("wa", width(&traj.w_actor)));
    cols.extend(["gamma_min", "gamma_max", "cost", "value_error"].map(String::from));
    if let Some(theta) = traj.theta.first() {
        for r in 1..=theta.nrows() {
            for c in 1..=theta.ncols() {
                cols.push(format!("theta_{r}_{c}"));
            }
        }
    }
    cols
}

/// Plain decimal notation with 17 significant digits.
pub fn format_number(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (16 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

/// One formatted row per recorded sample.
pub fn csv_row(traj: &Trajectory, k: usize) -> Vec<String> {
    let mut row = vec![format_number(traj.times[k])];
    for v in [&traj.states[k], &traj.controls[k], &traj.w_critic[k], &traj.w_actor[k]] {
        row.extend(v.iter().copied().map(format_number));
    }
    let (lo, hi) = traj.gamma_eigs[k];
    row.extend([lo, hi, traj.accumulated_cost[k], traj.value_error[k]].map(format_number));
    if let Some(theta) = traj.theta.get(k) {
        for r in 0..theta.nrows() {
            for c in 0..theta.ncols() {
                row.push(format_number(theta[(r, c)]));
            }
        }
    }
    row
}

pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(traj))?;
    for k in 0..traj.len() {
        w.write_record(csv_row(traj, k))?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(traj: &Trajectory) -> String {
    let mut buf = Vec::new();
    write_csv(traj, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}
