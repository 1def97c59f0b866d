//! Concurrent-learning identification of a linearly parameterized drift
//! `f(x) = θᵀ σθ(x)`.
//!
//! The identifier pairs a state observer with a gradient law that also
//! replays a recorded history stack:
//!
//! ```text
//! x̂̇ = θ̂ᵀσθ(x) + g(x)u + k (x − x̂)
//! θ̂̇ = Γθ σθ(x)(x − x̂)ᵀ + kθ Γθ Σ_j σθ(x_j)(ẋ_j − g(x_j)u_j − θ̂ᵀσθ(x_j))ᵀ
//! ```

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{check_len, BenchmarkPlant, ControlAffine};
use crate::error::{Result, StafError};
use crate::ode::{Integrator, OdeState};

/// `σθ(x) = [x1, x2, x2 (cos 2x1 + 2)]`
pub fn features_benchmark(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![x[0], x[1], x[1] * BenchmarkPlant::input_gain(x[0])])
}

/// Parameters of the benchmark drift, arranged `p × n`.
pub fn benchmark_theta() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 2, &[-1.0, -0.5, 1.0, 0.0, 0.0, -0.5])
}

/// Benchmark plant with drift `θ̂ᵀσθ(x)`; `g` is known exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDriftModel {
    pub theta_hat: DMatrix<f64>,
    pub theta_true: Option<DMatrix<f64>>,
}

impl LinearDriftModel {
    pub fn new(theta_hat: DMatrix<f64>) -> Result<Self> {
        if theta_hat.shape() != (3, 2) {
            return Err(StafError::dims("drift parameters", 3 * 2, theta_hat.len()));
        }
        Ok(LinearDriftModel {
            theta_hat,
            theta_true: None,
        })
    }

    pub fn with_truth(mut self, theta: DMatrix<f64>) -> Self {
        self.theta_true = Some(theta);
        self
    }

    pub fn num_features(&self) -> usize {
        self.theta_hat.nrows()
    }

    pub fn predicted_drift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.theta_hat.tr_mul(&features_benchmark(x))
    }

    /// `max |θ̂ − θ|`, if the truth is known.
    pub fn parameter_error(&self) -> Option<f64> {
        self.theta_true.as_ref().map(|t| (&self.theta_hat - t).amax())
    }
}

impl ControlAffine for LinearDriftModel {
    fn state_dim(&self) -> usize {
        self.theta_hat.ncols()
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("model drift", x, 2)?;
        Ok(self.predicted_drift(x))
    }

    fn effectiveness(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        BenchmarkPlant.effectiveness(x)
    }
}

/// A recorded `(x_j, u_j, ẋ_j)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct StackEntry {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub xdot: DVector<f64>,
}

/// Fixed-capacity history stack whose recorded features are kept as well
/// conditioned as possible.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStack {
    capacity: usize,
    entries: Vec<StackEntry>,
    features: Vec<DVector<f64>>,
    min_singular_value: f64,
}

impl HistoryStack {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(StafError::Config("history stack capacity must be positive".into()));
        }
        Ok(HistoryStack {
            capacity,
            entries: Vec::with_capacity(capacity),
            features: Vec::with_capacity(capacity),
            min_singular_value: 0.0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[StackEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_singular_value(&self) -> f64 {
        self.min_singular_value
    }

    /// Offer a candidate. Below capacity it is appended; at capacity it
    /// replaces the entry whose swap yields the largest smallest singular
    /// value, provided that beats the current one. Returns whether the
    /// stack changed.
    pub fn insert(&mut self, candidate: StackEntry) -> bool {
        let phi = features_benchmark(&candidate.x);
        if self.entries.len() < self.capacity {
            self.entries.push(candidate);
            self.features.push(phi);
            self.min_singular_value = stacked_min_singular_value(&self.features);
            return true;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut trial = self.features.clone();
        for j in 0..self.capacity {
            let saved = std::mem::replace(&mut trial[j], phi.clone());
            let s = stacked_min_singular_value(&trial);
            trial[j] = saved;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        match best {
            Some((j, s)) if s > self.min_singular_value => {
                self.entries[j] = candidate;
                self.features[j] = phi;
                self.min_singular_value = s;
                true
            }
            _ => false,
        }
    }
}

/// Smallest singular value of the matrix whose rows are `rows`; zero when
/// there are fewer rows than columns.
pub fn stacked_min_singular_value(rows: &[DVector<f64>]) -> f64 {
    let Some(first) = rows.first() else {
        return 0.0;
    };
    let p = first.len();
    if rows.len() < p {
        return 0.0;
    }
    let m = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    m.svd(false, false).singular_values.min()
}

pub fn stack_insert(mut stack: HistoryStack, candidate: StackEntry) -> HistoryStack {
    stack.insert(candidate);
    stack
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierGains {
    /// Observer output-injection gain.
    pub k: f64,
    /// Weight on the history-stack term.
    pub k_theta: f64,
    pub gamma_theta: DMatrix<f64>,
}

impl IdentifierGains {
    pub fn tracking_defaults() -> Self {
        IdentifierGains {
            k: 500.0,
            k_theta: 20.0,
            gamma_theta: DMatrix::identity(3, 3),
        }
    }
}

/// Time derivatives `(x̂̇, θ̂̇)` of the observer and the parameter estimate.
pub fn identifier_rhs(
    model: &LinearDriftModel,
    stack: &HistoryStack,
    x: &DVector<f64>,
    x_hat: &DVector<f64>,
    u: &DVector<f64>,
    gains: &IdentifierGains,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = model.state_dim();
    check_len("identifier state", x, n)?;
    check_len("observer state", x_hat, n)?;
    let plant = BenchmarkPlant;
    let phi = features_benchmark(x);
    let x_tilde = x - x_hat;
    let x_hat_dot = model.predicted_drift(x) + plant.effectiveness(x)? * u + &x_tilde * gains.k;

    let mut replay = DMatrix::zeros(model.num_features(), n);
    for entry in stack.entries() {
        let phi_j = features_benchmark(&entry.x);
        let residual = &entry.xdot - plant.effectiveness(&entry.x)? * &entry.u - model.theta_hat.tr_mul(&phi_j);
        replay.ger(1.0, &phi_j, &residual, 1.0);
    }
    let theta_dot = &gains.gamma_theta * (phi * x_tilde.transpose() + replay * gains.k_theta);
    Ok((x_hat_dot, theta_dot))
}

/// Advance `(x̂, θ̂)` by one step with the plant state and input frozen.
pub fn identifier_step(
    model: &mut LinearDriftModel,
    stack: &HistoryStack,
    x: &DVector<f64>,
    x_hat: &mut DVector<f64>,
    u: &DVector<f64>,
    gains: &IdentifierGains,
    integrator: Integrator,
    dt: f64,
) -> Result<()> {
    let n = x_hat.len();
    let mut layout = OdeState::new();
    let xh = layout.push_vector(x_hat);
    let th = layout.push_matrix(&model.theta_hat);
    let mut y = layout.into_vector();
    let template = model.clone();
    integrator.step(&mut y, 0.0, dt, |_, y| {
        let mut m = template.clone();
        m.theta_hat = th.read_matrix(y);
        let (dx, dth) = identifier_rhs(&m, stack, x, &xh.read_vector(y), u, gains)?;
        let mut out = DVector::zeros(y.len());
        xh.write_vector(&mut out, &dx);
        th.write_matrix(&mut out, &dth);
        Ok(out)
    })?;
    debug_assert_eq!(xh.len(), n);
    *x_hat = xh.read_vector(&y);
    model.theta_hat = th.read_matrix(&y);
    Ok(())
}
