//! Explicit integrators over a flat state vector, plus a small layout helper
//! for packing vectors and matrices into that state.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StafError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Classical fourth-order Runge-Kutta with `substeps` equal sub-steps per
    /// sampling interval.
    Rk4 { substeps: usize },
    Euler { substeps: usize },
    /// Dormand-Prince 5(4) with local error control inside each sampling
    /// interval. The interval end points are always hit exactly.
    Dopri5 { rtol: f64, atol: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Dopri5 {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

impl Integrator {
    pub fn rk4() -> Self {
        Integrator::Rk4 { substeps: 1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Integrator::Rk4 { .. } => "rk4",
            Integrator::Euler { .. } => "euler",
            Integrator::Dopri5 { .. } => "dopri5",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Integrator::Rk4 { substeps } | Integrator::Euler { substeps } if substeps == 0 => {
                Err(StafError::Config("integrator substeps must be at least 1".into()))
            }
            Integrator::Dopri5 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => Err(StafError::Config(
                format!("integrator tolerances must be positive, got rtol {rtol}, atol {atol}"),
            )),
            _ => Ok(()),
        }
    }

    /// Advance `y` from `t` to `t + dt` in place without carrying a step-size
    /// hint between calls. Prefer [`Stepper`] in loops.
    pub fn step<F>(self, y: &mut DVector<f64>, t: f64, dt: f64, rhs: F) -> Result<()>
    where
        F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
    {
        Stepper::new(self).advance(y, t, dt, rhs)
    }
}

/// An integrator plus the adaptive step size carried between intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepper {
    method: Integrator,
    h_hint: Option<f64>,
    accepted: usize,
    rejected: usize,
}

/// Smallest adaptive step, as a fraction of the sampling interval.
const MIN_STEP_FRACTION: f64 = 1e-6;
/// Attempted steps allowed inside one sampling interval before the solve is
/// declared numerically failed.
const MAX_ATTEMPTS: usize = 5_000;

impl Stepper {
    pub fn new(method: Integrator) -> Self {
        Stepper {
            method,
            h_hint: None,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Steps taken so far, counting every fixed sub-step.
    pub fn accepted(&self) -> usize {
        self.accepted
    }

    /// Adaptive steps rejected so far.
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn advance<F>(&mut self, y: &mut DVector<f64>, t: f64, dt: f64, mut rhs: F) -> Result<()>
    where
        F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
    {
        match self.method {
            Integrator::Euler { substeps } => {
                let h = dt / substeps as f64;
                for s in 0..substeps {
                    let k1 = rhs(t + s as f64 * h, y)?;
                    y.axpy(h, &k1, 1.0);
                }
                self.accepted += substeps;
            }
            Integrator::Rk4 { substeps } => {
                let h = dt / substeps as f64;
                for s in 0..substeps {
                    let incr = rk4_increment(y, t + s as f64 * h, h, &mut rhs)?;
                    *y += incr;
                }
                self.accepted += substeps;
            }
            Integrator::Dopri5 { rtol, atol } => self.dopri5(y, t, dt, rtol, atol, &mut rhs)?,
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(StafError::NumericRange("non-finite integrator state".into()));
        }
        Ok(())
    }

    fn dopri5<F>(&mut self, y: &mut DVector<f64>, t0: f64, dt: f64, rtol: f64, atol: f64, rhs: &mut F) -> Result<()>
    where
        F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
    {
        let t_end = t0 + dt;
        let mut t = t0;
        let mut h = self.h_hint.unwrap_or(dt).min(dt);
        for _ in 0..MAX_ATTEMPTS {
            if t >= t_end {
                self.h_hint = Some(h.min(dt));
                return Ok(());
            }
            let last = t + h >= t_end - 1e-12 * dt;
            let h_try = if last { t_end - t } else { h };
            match dopri5_trial(y, t, h_try, rtol, atol, rhs) {
                Ok((y_new, err)) if err <= 1.0 => {
                    *y = y_new;
                    self.accepted += 1;
                    t = if last { t_end } else { t + h_try };
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // Keep the un-truncated step as the hint when the last
                    // step was clipped to the interval end.
                    h = if last { h.max(h_try * grow) } else { h_try * grow };
                }
                Ok((_, err)) => {
                    self.rejected += 1;
                    h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                }
                Err(StafError::NumericRange(_)) => {
                    self.rejected += 1;
                    h = h_try * 0.25;
                }
                Err(e) => return Err(e),
            }
            if h < MIN_STEP_FRACTION * dt {
                return Err(StafError::NumericRange(format!(
                    "adaptive step size underflow at t = {t}"
                )));
            }
        }
        if t >= t_end {
            self.h_hint = Some(h.min(dt));
            return Ok(());
        }
        Err(StafError::NumericRange(format!(
            "adaptive integrator exceeded {MAX_ATTEMPTS} attempts in one interval at t = {t}"
        )))
    }
}

fn rk4_increment<F>(y: &DVector<f64>, t: f64, h: f64, rhs: &mut F) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let half = 0.5 * h;
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + half, &(y + &k1 * half))?;
    let k3 = rhs(t + half, &(y + &k2 * half))?;
    let k4 = rhs(t + h, &(y + &k3 * h))?;
    Ok((k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

// Dormand-Prince tableau.
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// One trial step; returns the fifth-order solution and the scaled error norm.
fn dopri5_trial<F>(
    y: &DVector<f64>,
    t: f64,
    h: f64,
    rtol: f64,
    atol: f64,
    rhs: &mut F,
) -> Result<(DVector<f64>, f64)>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    k.push(rhs(t, y)?);
    for (stage, row) in A.iter().enumerate() {
        let mut yi = y.clone();
        for (a, kj) in row.iter().zip(&k) {
            if *a != 0.0 {
                yi.axpy(h * a, kj, 1.0);
            }
        }
        if stage == 5 {
            // The last row is the solution itself (first-same-as-last).
            k.push(rhs(t + C[stage] * h, &yi)?);
            let mut err_sq = 0.0;
            for i in 0..y.len() {
                let e: f64 = E.iter().zip(&k).map(|(w, kj)| w * kj[i]).sum::<f64>() * h;
                let scale = atol + rtol * y[i].abs().max(yi[i].abs());
                err_sq += (e / scale).powi(2);
            }
            let err = (err_sq / y.len().max(1) as f64).sqrt();
            if !err.is_finite() || yi.iter().any(|v| !v.is_finite()) {
                return Err(StafError::NumericRange("non-finite trial step".into()));
            }
            return Ok((yi, err));
        }
        k.push(rhs(t + C[stage] * h, &yi)?);
    }
    unreachable!("tableau has a final solution row")
}

/// A contiguous block of the flat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn read_vector(&self, y: &DVector<f64>) -> DVector<f64> {
        y.rows(self.offset, self.len()).into_owned()
    }

    pub fn read_scalar(&self, y: &DVector<f64>) -> f64 {
        y[self.offset]
    }

    /// Column-major, matching nalgebra storage.
    pub fn read_matrix(&self, y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &y.as_slice()[self.offset..self.offset + self.len()])
    }

    pub fn write_vector(&self, y: &mut DVector<f64>, v: &DVector<f64>) {
        y.rows_mut(self.offset, self.len()).copy_from(v);
    }

    pub fn write_scalar(&self, y: &mut DVector<f64>, v: f64) {
        y[self.offset] = v;
    }

    pub fn write_matrix(&self, y: &mut DVector<f64>, m: &DMatrix<f64>) {
        y.as_mut_slice()[self.offset..self.offset + self.len()].copy_from_slice(m.as_slice());
    }
}

/// Builder for the flat state vector.
#[derive(Debug, Clone, Default)]
pub struct OdeState {
    data: Vec<f64>,
}

impl OdeState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_vector(&mut self, v: &DVector<f64>) -> Slot {
        let slot = Slot {
            offset: self.data.len(),
            rows: v.len(),
            cols: 1,
        };
        self.data.extend(v.iter());
        slot
    }

    pub fn push_scalar(&mut self, v: f64) -> Slot {
        let slot = Slot {
            offset: self.data.len(),
            rows: 1,
            cols: 1,
        };
        self.data.push(v);
        slot
    }

    pub fn push_matrix(&mut self, m: &DMatrix<f64>) -> Slot {
        let slot = Slot {
            offset: self.data.len(),
            rows: m.nrows(),
            cols: m.ncols(),
        };
        self.data.extend_from_slice(m.as_slice());
        slot
    }

    pub fn into_vector(self) -> DVector<f64> {
        DVector::from_vec(self.data)
    }
}
