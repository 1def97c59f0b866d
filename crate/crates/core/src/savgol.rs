//! Savitzky-Golay derivative estimation on a uniform grid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StafError};

/// Least-squares polynomial differentiator evaluated at the window center.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeFilter {
    order: usize,
    window_length: usize,
    /// First-derivative weights for unit sample spacing.
    weights: Vec<f64>,
}

impl DerivativeFilter {
    pub fn new(order: usize, window_length: usize) -> Result<Self> {
        if window_length % 2 == 0 || window_length <= order {
            return Err(StafError::Config(format!(
                "window length must be odd and exceed the order ({order}), got {window_length}"
            )));
        }
        if order == 0 {
            return Err(StafError::Config("a derivative filter needs order >= 1".into()));
        }
        let half = (window_length / 2) as f64;
        let vandermonde = DMatrix::from_fn(window_length, order + 1, |i, j| (i as f64 - half).powi(j as i32));
        // Row 1 of (VᵀV)⁻¹Vᵀ gives the slope coefficient at the center.
        let gram = vandermonde.tr_mul(&vandermonde);
        let gram_inv = gram
            .cholesky()
            .ok_or_else(|| StafError::NumericRange("singular Savitzky-Golay normal matrix".into()))?
            .inverse();
        let projector = gram_inv * vandermonde.transpose();
        let weights = projector.row(1).iter().copied().collect();
        Ok(DerivativeFilter {
            order,
            window_length,
            weights,
        })
    }

    /// Fifth-order filter.
    pub fn quintic(window_length: usize) -> Result<Self> {
        Self::new(5, window_length)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Derivative at the center of `window` (scalar samples `dt` apart).
    pub fn derivative(&self, window: &[f64], dt: f64) -> Result<f64> {
        if window.len() != self.window_length {
            return Err(StafError::dims("derivative window", self.window_length, window.len()));
        }
        Ok(self.weights.iter().zip(window).map(|(w, y)| w * y).sum::<f64>() / dt)
    }

    /// Component-wise derivative of a window of vector samples.
    pub fn derivative_vec<'a, I>(&self, window: I, dt: f64) -> Result<DVector<f64>>
    where
        I: IntoIterator<Item = &'a DVector<f64>>,
    {
        let mut acc: Option<DVector<f64>> = None;
        let mut count = 0;
        for (w, y) in self.weights.iter().zip(window) {
            match acc.as_mut() {
                Some(a) => *a += y * *w,
                None => acc = Some(y * *w),
            }
            count += 1;
        }
        match acc {
            Some(a) if count == self.window_length => Ok(a / dt),
            _ => Err(StafError::dims("derivative window", self.window_length, count)),
        }
    }
}
