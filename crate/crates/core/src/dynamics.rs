//! Control-affine plants `ẋ = f(x) + g(x)u`, quadratic costs, and the
//! error/desired-state transformation used for tracking.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StafError};

/// Singular values below this fraction of the largest are treated as zero.
const PINV_RELATIVE_TOL: f64 = 1e-10;

pub trait ControlAffine {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    /// `f(x)`
    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// `g(x)`, an `n × m` matrix.
    fn effectiveness(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn velocity(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.drift(x)? + self.effectiveness(x)? * u)
    }
}

impl<T: ControlAffine + ?Sized> ControlAffine for &T {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn control_dim(&self) -> usize {
        (**self).control_dim()
    }
    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).drift(x)
    }
    fn effectiveness(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).effectiveness(x)
    }
}

pub(crate) fn check_len(context: &'static str, v: &DVector<f64>, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(StafError::dims(context, expected, v.len()));
    }
    Ok(())
}

/// The two-state nonlinear benchmark whose optimal value function is
/// `½x1² + x2²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BenchmarkPlant;

impl BenchmarkPlant {
    pub fn input_gain(x1: f64) -> f64 {
        (2.0 * x1).cos() + 2.0
    }
}

impl ControlAffine for BenchmarkPlant {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("benchmark drift", x, 2)?;
        let b = Self::input_gain(x[0]);
        Ok(DVector::from_vec(vec![
            -x[0] + x[1],
            -0.5 * x[0] - 0.5 * x[1] * (1.0 - b * b),
        ]))
    }

    fn effectiveness(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("benchmark effectiveness", x, 2)?;
        Ok(DMatrix::from_column_slice(2, 1, &[0.0, Self::input_gain(x[0])]))
    }
}

/// Instantaneous cost `r(x, u) = xᵀQx + uᵀRu`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    state_weight: DMatrix<f64>,
    control_weight: DMatrix<f64>,
    control_weight_inv: DMatrix<f64>,
}

impl CostSpec {
    /// Fails if `Q` is not symmetric positive semidefinite or `R` is not
    /// symmetric positive definite.
    pub fn new(state_weight: DMatrix<f64>, control_weight: DMatrix<f64>) -> Result<Self> {
        if !state_weight.is_square() || !control_weight.is_square() {
            return Err(StafError::Config("cost weights must be square".into()));
        }
        check_symmetric("Q", &state_weight)?;
        check_symmetric("R", &control_weight)?;
        let q_min = state_weight.clone().symmetric_eigen().eigenvalues.min();
        if q_min < -1e-12 {
            return Err(StafError::Config(format!(
                "Q must be positive semidefinite (smallest eigenvalue {q_min})"
            )));
        }
        let r_min = control_weight.clone().symmetric_eigen().eigenvalues.min();
        if r_min <= 0.0 {
            return Err(StafError::Config(format!(
                "R must be positive definite (smallest eigenvalue {r_min})"
            )));
        }
        let control_weight_inv = control_weight
            .clone()
            .cholesky()
            .ok_or_else(|| StafError::Config("R is singular".into()))?
            .inverse();
        Ok(CostSpec {
            state_weight,
            control_weight,
            control_weight_inv,
        })
    }

    pub fn state_weight(&self) -> &DMatrix<f64> {
        &self.state_weight
    }

    pub fn control_weight(&self) -> &DMatrix<f64> {
        &self.control_weight
    }

    pub fn control_weight_inv(&self) -> &DMatrix<f64> {
        &self.control_weight_inv
    }

    pub fn state_dim(&self) -> usize {
        self.state_weight.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.control_weight.nrows()
    }

    /// `Q(x) = xᵀQx`
    pub fn state_cost(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("state cost", x, self.state_dim())?;
        Ok(x.dot(&(&self.state_weight * x)))
    }

    pub fn control_cost(&self, u: &DVector<f64>) -> Result<f64> {
        check_len("control cost", u, self.control_dim())?;
        Ok(u.dot(&(&self.control_weight * u)))
    }
}

fn check_symmetric(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 {
        return Err(StafError::Config(format!(
            "{name} must be symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// `Q(x) + uᵀRu`.
pub fn running_cost(cost: &CostSpec, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
    Ok(cost.state_cost(x)? + cost.control_cost(u)?)
}

/// Left-endpoint accumulation of the running cost along a sampled path.
/// The simulator integrates cost as an extra state instead; this is for
/// recorded data.
pub fn accumulate_cost(
    cost: &CostSpec,
    states: &[DVector<f64>],
    controls: &[DVector<f64>],
    dt: f64,
) -> Result<f64> {
    if states.len() != controls.len() {
        return Err(StafError::dims("cost accumulation", states.len(), controls.len()));
    }
    let mut total = 0.0;
    for (x, u) in states.iter().zip(controls) {
        total += running_cost(cost, x, u)? * dt;
    }
    Ok(total)
}

/// Closed-form optimal solution, when one is known.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticSolution {
    pub value: fn(&DVector<f64>) -> f64,
    pub value_gradient: fn(&DVector<f64>) -> DVector<f64>,
    pub policy: fn(&DVector<f64>) -> DVector<f64>,
}

fn benchmark_value(x: &DVector<f64>) -> f64 {
    0.5 * x[0] * x[0] + x[1] * x[1]
}

fn benchmark_value_gradient(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![x[0], 2.0 * x[1]])
}

fn benchmark_policy(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_element(1, -BenchmarkPlant::input_gain(x[0]) * x[1])
}

/// Plant, cost `xᵀx + u²`, and the known optimal solution of the regulation
/// benchmark.
pub fn regulation_benchmark() -> (BenchmarkPlant, CostSpec, AnalyticSolution) {
    let cost = CostSpec::new(DMatrix::identity(2, 2), DMatrix::identity(1, 1))
        .expect("identity weights are valid");
    let solution = AnalyticSolution {
        value: benchmark_value,
        value_gradient: benchmark_value_gradient,
        policy: benchmark_policy,
    };
    (BenchmarkPlant, cost, solution)
}

/// `−½ R⁻¹ g(x)ᵀ ∇V(x)ᵀ`, with the gradient given as a length-`n` vector.
pub fn optimal_policy_from_gradient<S: ControlAffine>(
    system: &S,
    cost: &CostSpec,
    value_gradient: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("value gradient", value_gradient, system.state_dim())?;
    let g = system.effectiveness(x)?;
    Ok(cost.control_weight_inv() * g.transpose() * value_gradient * -0.5)
}

/// Closed-loop HJB residual
/// `−¼ ∇V g R⁻¹ gᵀ ∇Vᵀ + ∇V f + Q(x)`.
pub fn hjb_residual<S, F>(system: &S, cost: &CostSpec, value_gradient: F, x: &DVector<f64>) -> Result<f64>
where
    S: ControlAffine,
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let grad = value_gradient(x);
    check_len("value gradient", &grad, system.state_dim())?;
    let f = system.drift(x)?;
    let g = system.effectiveness(x)?;
    let gt_grad = g.transpose() * &grad;
    let quad = gt_grad.dot(&(cost.control_weight_inv() * &gt_grad));
    Ok(-0.25 * quad + grad.dot(&f) + cost.state_cost(x)?)
}

/// Moore-Penrose pseudoinverse via SVD; fails if the matrix is rank deficient
/// in its smaller dimension.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let cutoff = PINV_RELATIVE_TOL * largest;
    let full_rank = m.nrows().min(m.ncols());
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if largest <= 0.0 || rank < full_rank {
        return Err(StafError::NumericRange(format!(
            "pseudoinverse of rank-deficient matrix (rank {rank} < {full_rank})"
        )));
    }
    svd.pseudo_inverse(cutoff)
        .map_err(|e| StafError::NumericRange(e.to_string()))
}

/// Problem data for following `ẋd = A xd` with cost `eᵀ Qe e + μᵀRμ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingProblem<P> {
    pub plant: P,
    pub desired_matrix: DMatrix<f64>,
    pub desired_initial: DVector<f64>,
    pub error_weight: DMatrix<f64>,
    pub control_weight: DMatrix<f64>,
}

impl<P: ControlAffine> TrackingProblem<P> {
    /// Follow the harmonic orbit with `plant`: `ẋd = [[-1, 1], [-2, 1]] xd`, `xd(0) = [0, 1]`,
    /// error weight `diag(10, 10)`, `R = 1`.
    pub fn benchmark(plant: P) -> Self {
        TrackingProblem {
            plant,
            desired_matrix: DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -2.0, 1.0]),
            desired_initial: DVector::from_vec(vec![0.0, 1.0]),
            error_weight: DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 10.0])),
            control_weight: DMatrix::identity(1, 1),
        }
    }
}

impl<P: ControlAffine> TrackingProblem<P> {
    /// Cost over the concatenated state `ζ = [e; xd]`; only `e` is penalized.
    pub fn cost(&self) -> Result<CostSpec> {
        let n = self.plant.state_dim();
        if self.error_weight.shape() != (n, n) {
            return Err(StafError::dims("tracking error weight", n, self.error_weight.nrows()));
        }
        let mut q = DMatrix::zeros(2 * n, 2 * n);
        q.view_mut((0, 0), (n, n)).copy_from(&self.error_weight);
        CostSpec::new(q, self.control_weight.clone())
    }

    pub fn initial_concatenated(&self, x0: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.plant.state_dim();
        check_len("tracking initial state", x0, n)?;
        check_len("desired initial state", &self.desired_initial, n)?;
        Ok(concat(&(x0 - &self.desired_initial), &self.desired_initial))
    }
}

/// Build the stationary `ζ`-system of a tracking problem around the plant
/// model `plant`.
pub fn tracking_transform<P: ControlAffine>(problem: &TrackingProblem<P>) -> TrackingSystem<&P> {
    TrackingSystem::new(&problem.plant, problem.desired_matrix.clone())
}

pub(crate) fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Dynamics of `ζ = [e; xd]` under `u = μ + g⁺(xd)(hd(xd) − f(xd))`:
///
/// ```text
/// F(ζ) = [ f(e+xd) − hd(xd) + g(e+xd) g⁺(xd) (hd(xd) − f(xd)) ;  hd(xd) ]
/// G(ζ) = [ g(e+xd) ; 0 ]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingSystem<P> {
    plant: P,
    desired_matrix: DMatrix<f64>,
}

impl<P: ControlAffine> TrackingSystem<P> {
    pub fn new(plant: P, desired_matrix: DMatrix<f64>) -> Self {
        TrackingSystem {
            plant,
            desired_matrix,
        }
    }

    pub fn plant(&self) -> &P {
        &self.plant
    }

    fn n(&self) -> usize {
        self.plant.state_dim()
    }

    /// Splits `ζ` into `(e, xd)`.
    pub fn split(&self, zeta: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.n();
        check_len("concatenated state", zeta, 2 * n)?;
        Ok((zeta.rows(0, n).into_owned(), zeta.rows(n, n).into_owned()))
    }

    pub fn desired_velocity(&self, xd: &DVector<f64>) -> DVector<f64> {
        &self.desired_matrix * xd
    }

    /// `g⁺(xd)(hd(xd) − f(xd))`, the input that keeps `e = 0` invariant.
    pub fn feedforward(&self, xd: &DVector<f64>) -> Result<DVector<f64>> {
        let g_pinv = pseudo_inverse(&self.plant.effectiveness(xd)?)?;
        Ok(g_pinv * (self.desired_velocity(xd) - self.plant.drift(xd)?))
    }

    /// Plant input `u = μ + g⁺(xd)(hd(xd) − f(xd))`.
    pub fn plant_input(&self, zeta: &DVector<f64>, mu: &DVector<f64>) -> Result<DVector<f64>> {
        let (_, xd) = self.split(zeta)?;
        Ok(mu + self.feedforward(&xd)?)
    }
}

impl<P: ControlAffine> ControlAffine for TrackingSystem<P> {
    fn state_dim(&self) -> usize {
        2 * self.n()
    }

    fn control_dim(&self) -> usize {
        self.plant.control_dim()
    }

    fn drift(&self, zeta: &DVector<f64>) -> Result<DVector<f64>> {
        let (e, xd) = self.split(zeta)?;
        let x = &e + &xd;
        let hd = self.desired_velocity(&xd);
        let error_rate = self.plant.drift(&x)? - &hd + self.plant.effectiveness(&x)? * self.feedforward(&xd)?;
        Ok(concat(&error_rate, &hd))
    }

    fn effectiveness(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (e, xd) = self.split(zeta)?;
        let n = self.n();
        let g = self.plant.effectiveness(&(&e + &xd))?;
        let mut out = DMatrix::zeros(2 * n, g.ncols());
        out.view_mut((0, 0), (n, g.ncols())).copy_from(&g);
        Ok(out)
    }
}
