//! State-following exponential kernels.
//!
//! Each kernel is `σ_i(y, c_i) = exp(yᵀ c_i) − 1` with a center that rides
//! along with the state: `c_i(x) = x + scale · shrink(x) · d_i`. The basis is
//! always evaluated with centers anchored at some state `x`; the gradient
//! returned by [`StafBasis::grad_sigma_at`] is the partial derivative in the
//! first argument with the centers held fixed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StafError};

/// Exponents above this are rejected instead of returning `inf`.
const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkMode {
    /// `(xᵀx + eps0) / (1 + nu2 · xᵀx)`
    Shrinking,
    ConstantOne,
}

/// Scales the center polytope as a function of the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkFunction {
    pub eps0: f64,
    pub nu2: f64,
    pub scale: f64,
    pub mode: ShrinkMode,
}

impl ShrinkFunction {
    pub fn shrinking(eps0: f64, nu2: f64, scale: f64) -> Self {
        ShrinkFunction {
            eps0,
            nu2,
            scale,
            mode: ShrinkMode::Shrinking,
        }
    }

    pub fn constant_one(scale: f64) -> Self {
        ShrinkFunction {
            eps0: 0.0,
            nu2: 0.0,
            scale,
            mode: ShrinkMode::ConstantOne,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self.mode {
            ShrinkMode::ConstantOne => 1.0,
            ShrinkMode::Shrinking => {
                let sq = x.norm_squared();
                (sq + self.eps0) / (1.0 + self.nu2 * sq)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.scale < 0.0 || !self.scale.is_finite() {
            return Err(StafError::Config(format!(
                "shrink scale must be nonnegative, got {}",
                self.scale
            )));
        }
        if self.mode == ShrinkMode::Shrinking {
            if self.eps0 <= 0.0 || !self.eps0.is_finite() {
                return Err(StafError::Config(format!(
                    "shrink eps0 must be positive, got {}",
                    self.eps0
                )));
            }
            if self.nu2 < 0.0 || !self.nu2.is_finite() {
                return Err(StafError::Config(format!(
                    "shrink nu2 must be nonnegative, got {}",
                    self.nu2
                )));
            }
        }
        Ok(())
    }
}

/// A family of `L` state-following kernels on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StafBasis {
    dimension: usize,
    offsets: Vec<DVector<f64>>,
    shrink: ShrinkFunction,
}

impl StafBasis {
    pub fn new(dimension: usize, offsets: Vec<DVector<f64>>, shrink: ShrinkFunction) -> Result<Self> {
        if dimension == 0 {
            return Err(StafError::Config("basis dimension must be positive".into()));
        }
        if offsets.is_empty() {
            return Err(StafError::Config("basis needs at least one kernel".into()));
        }
        for d in &offsets {
            if d.len() != dimension {
                return Err(StafError::dims("kernel offset", dimension, d.len()));
            }
        }
        for i in 0..offsets.len() {
            for j in (i + 1)..offsets.len() {
                if (&offsets[i] - &offsets[j]).norm() == 0.0 {
                    return Err(StafError::Config(format!(
                        "kernel offsets {i} and {j} coincide"
                    )));
                }
            }
        }
        shrink.validate()?;
        Ok(StafBasis {
            dimension,
            offsets,
            shrink,
        })
    }

    /// Three kernels on the vertices of a shrinking triangle around the state.
    pub fn regulation_triangle(nu2: f64) -> Self {
        let offsets = vec![
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![0.87, -0.5]),
            DVector::from_vec(vec![-0.87, -0.5]),
        ];
        Self::new(2, offsets, ShrinkFunction::shrinking(0.01, nu2, 0.7))
            .expect("triangle basis is well formed")
    }

    /// `dimension + 1` kernels on a regular simplex around the state, with a
    /// constant (non-shrinking) size.
    pub fn simplex(dimension: usize, scale: f64) -> Result<Self> {
        Self::new(
            dimension,
            regular_simplex(dimension),
            ShrinkFunction::constant_one(scale),
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn num_kernels(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[DVector<f64>] {
        &self.offsets
    }

    pub fn shrink(&self) -> &ShrinkFunction {
        &self.shrink
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dimension {
            return Err(StafError::dims("basis state", self.dimension, x.len()));
        }
        Ok(())
    }

    pub fn centers(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_dim(x)?;
        let radius = self.shrink.scale * self.shrink.value(x);
        Ok(self.offsets.iter().map(|d| x + d * radius).collect())
    }

    /// `σ(x, c(x))`.
    pub fn sigma(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.sigma_at(x, &self.centers(x)?)
    }

    /// `∂σ(y, c)/∂y` at `y = x`, `c = c(x)`.
    pub fn grad_sigma(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.grad_sigma_at(x, &self.centers(x)?)
    }

    /// Kernel vector at `y` against an explicit set of centers.
    pub fn sigma_at(&self, y: &DVector<f64>, centers: &[DVector<f64>]) -> Result<DVector<f64>> {
        self.check_dim(y)?;
        let mut out = DVector::zeros(centers.len());
        for (i, c) in centers.iter().enumerate() {
            // exp_m1 keeps σ accurate for tiny exponents near the origin.
            out[i] = exponent(y, c)?.exp_m1();
        }
        Ok(out)
    }

    /// `L × n` gradient at `y`; row `i` is `c_iᵀ exp(yᵀ c_i)`.
    pub fn grad_sigma_at(&self, y: &DVector<f64>, centers: &[DVector<f64>]) -> Result<DMatrix<f64>> {
        self.check_dim(y)?;
        let mut out = DMatrix::zeros(centers.len(), self.dimension);
        for (i, c) in centers.iter().enumerate() {
            let e = exponent(y, c)?.exp();
            for j in 0..self.dimension {
                out[(i, j)] = c[j] * e;
            }
        }
        Ok(out)
    }
}

fn exponent(y: &DVector<f64>, c: &DVector<f64>) -> Result<f64> {
    let arg = y.dot(c);
    if !arg.is_finite() || arg > MAX_EXPONENT {
        return Err(StafError::NumericRange(format!(
            "kernel exponent {arg} out of range"
        )));
    }
    Ok(arg)
}

/// Vertices of a regular `n`-simplex in `R^n` with centroid at the origin and
/// unit circumradius.
pub fn regular_simplex(n: usize) -> Vec<DVector<f64>> {
    let nf = n as f64;
    (0..=n)
        .map(|i| {
            DVector::from_fn(n, |j, _| {
                if j < i {
                    let k = (n - j) as f64;
                    -((nf + 1.0) / (nf * k * (k + 1.0))).sqrt()
                } else if j == i {
                    let k = (n - i) as f64;
                    ((nf + 1.0) * k / (nf * (k + 1.0))).sqrt()
                } else {
                    0.0
                }
            })
        })
        .collect()
}
