//! Smooth parts `f` of composite problems.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Point;

/// Evaluator bundle for a convex, twice (optionally thrice) differentiable `f`.
///
/// Implementations are expected to be pure; call accounting and finiteness
/// checks happen in [`crate::Oracle`].
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, x: &Point) -> DVector<f64>;

    fn hessian(&self, x: &Point) -> DMatrix<f64>;

    fn hessian_vec(&self, x: &Point, h: &Point) -> DVector<f64> {
        self.hessian(x) * h
    }

    /// `D³f(x)[h]³`, when the function can provide it.
    fn third_directional(&self, _x: &Point, _h: &Point) -> Option<f64> {
        None
    }
}

/// `f(x) = ⟨c, x⟩ + d`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub coeffs: DVector<f64>,
    pub offset: f64,
}

impl Linear {
    pub fn new(coeffs: DVector<f64>, offset: f64) -> Self {
        Self { coeffs, offset }
    }
}

impl SmoothFunction for Linear {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn value(&self, x: &Point) -> f64 {
        self.coeffs.dot(x) + self.offset
    }

    fn gradient(&self, _x: &Point) -> DVector<f64> {
        self.coeffs.clone()
    }

    fn hessian(&self, _x: &Point) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::zeros(n, n)
    }

    fn hessian_vec(&self, _x: &Point, _h: &Point) -> DVector<f64> {
        DVector::zeros(self.dim())
    }

    fn third_directional(&self, _x: &Point, _h: &Point) -> Option<f64> {
        Some(0.0)
    }
}

/// `f(x) = ½⟨Ax, x⟩ + ⟨b, x⟩` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    matrix: DMatrix<f64>,
    linear: DVector<f64>,
}

impl Quadratic {
    pub fn new(matrix: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
        }
        if linear.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: linear.len() });
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * (1.0 + matrix.amax()) {
            return Err(Error::InvalidParameter(format!(
                "quadratic matrix is not symmetric (max |A - Aᵀ| = {asym:e})"
            )));
        }
        Ok(Self { matrix, linear })
    }

    /// Pure quadratic form `½⟨Ax, x⟩`.
    pub fn homogeneous(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::zeros(n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * (&self.matrix * x).dot(x) + self.linear.dot(x)
    }

    fn gradient(&self, x: &Point) -> DVector<f64> {
        &self.matrix * x + &self.linear
    }

    fn hessian(&self, _x: &Point) -> DMatrix<f64> {
        self.matrix.clone()
    }

    fn hessian_vec(&self, _x: &Point, h: &Point) -> DVector<f64> {
        &self.matrix * h
    }

    fn third_directional(&self, _x: &Point, _h: &Point) -> Option<f64> {
        Some(0.0)
    }
}

/// Smoothed maximum `f(x) = μ ln Σᵢ exp((⟨aᵢ, x⟩ − bᵢ)/μ)`.
///
/// Rows of `coeffs` are the vectors `aᵢ`. All evaluations shift by the largest
/// exponent first, so large `1/μ` does not overflow.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    coeffs: DMatrix<f64>,
    offsets: DVector<f64>,
    mu: f64,
}

impl LogSumExp {
    pub fn new(coeffs: DMatrix<f64>, offsets: DVector<f64>, mu: f64) -> Result<Self> {
        if offsets.len() != coeffs.nrows() {
            return Err(Error::DimensionMismatch { expected: coeffs.nrows(), got: offsets.len() });
        }
        if coeffs.nrows() == 0 {
            return Err(Error::InvalidParameter("log-sum-exp needs at least one term".into()));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("smoothing parameter must be positive, got {mu}")));
        }
        Ok(Self { coeffs, offsets, mu })
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Scaled exponents `sᵢ = (⟨aᵢ, x⟩ − bᵢ)/μ`, their maximum, and the
    /// normalized softmax weights `πᵢ`.
    fn weights(&self, x: &Point) -> (f64, f64, DVector<f64>) {
        let s = (&self.coeffs * x - &self.offsets) / self.mu;
        let smax = s.max();
        let mut w = s.map(|si| (si - smax).exp());
        let total = w.sum();
        w /= total;
        (smax, total, w)
    }

    /// Softmax weights `π(x)`; they sum to one.
    pub fn softmax(&self, x: &Point) -> DVector<f64> {
        self.weights(x).2
    }
}

impl SmoothFunction for LogSumExp {
    fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    fn value(&self, x: &Point) -> f64 {
        let (smax, total, _) = self.weights(x);
        self.mu * (smax + total.ln())
    }

    fn gradient(&self, x: &Point) -> DVector<f64> {
        let pi = self.softmax(x);
        self.coeffs.tr_mul(&pi)
    }

    fn hessian(&self, x: &Point) -> DMatrix<f64> {
        let pi = self.softmax(x);
        let g = self.coeffs.tr_mul(&pi);
        let mut weighted = self.coeffs.clone();
        for (mut row, &p) in weighted.row_iter_mut().zip(pi.iter()) {
            row *= p;
        }
        let mut h = self.coeffs.tr_mul(&weighted);
        h.ger(-1.0, &g, &g, 1.0);
        h /= self.mu;
        // Symmetrize away rounding so downstream symmetric routines agree.
        let ht = h.transpose();
        (h + ht) * 0.5
    }

    fn hessian_vec(&self, x: &Point, h: &Point) -> DVector<f64> {
        let pi = self.softmax(x);
        let g = self.coeffs.tr_mul(&pi);
        let r = &self.coeffs * h;
        let weighted = r.component_mul(&pi);
        (self.coeffs.tr_mul(&weighted) - g * pi.dot(&r)) / self.mu
    }

    fn third_directional(&self, x: &Point, h: &Point) -> Option<f64> {
        // Third cumulant of ⟨a, h⟩ under π, scaled by 1/μ².
        let pi = self.softmax(x);
        let r = &self.coeffs * h;
        let mean = pi.dot(&r);
        let third: f64 = pi.iter().zip(r.iter()).map(|(p, ri)| p * (ri - mean).powi(3)).sum();
        Some(third / (self.mu * self.mu))
    }
}

/// Invertible affine map `T(y) = My + s`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    shift: DVector<f64>,
    inverse: DMatrix<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let n = linear.nrows();
        if linear.ncols() != n || shift.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: shift.len() });
        }
        let inverse = linear
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("affine map is not invertible".into()))?;
        Ok(Self { linear, shift, inverse })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    /// `T(y)`.
    pub fn apply(&self, y: &Point) -> Point {
        &self.linear * y + &self.shift
    }

    /// `T⁻¹(x)`.
    pub fn invert(&self, x: &Point) -> Point {
        &self.inverse * (x - &self.shift)
    }
}

/// Pull-back `g(y) = f(T(y))` of a smooth function through an affine map.
#[derive(Debug, Clone)]
pub struct AffinePullback {
    inner: Arc<dyn SmoothFunction>,
    map: AffineMap,
}

impl AffinePullback {
    pub fn new(inner: Arc<dyn SmoothFunction>, map: AffineMap) -> Result<Self> {
        if inner.dim() != map.dim() {
            return Err(Error::DimensionMismatch { expected: inner.dim(), got: map.dim() });
        }
        Ok(Self { inner, map })
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }
}

impl SmoothFunction for AffinePullback {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn value(&self, y: &Point) -> f64 {
        self.inner.value(&self.map.apply(y))
    }

    fn gradient(&self, y: &Point) -> DVector<f64> {
        self.map.linear.tr_mul(&self.inner.gradient(&self.map.apply(y)))
    }

    fn hessian(&self, y: &Point) -> DMatrix<f64> {
        let h = self.inner.hessian(&self.map.apply(y));
        self.map.linear.tr_mul(&(h * &self.map.linear))
    }

    fn hessian_vec(&self, y: &Point, d: &Point) -> DVector<f64> {
        let x = self.map.apply(y);
        let hd = self.inner.hessian_vec(&x, &(&self.map.linear * d));
        self.map.linear.tr_mul(&hd)
    }

    fn third_directional(&self, y: &Point, d: &Point) -> Option<f64> {
        self.inner.third_directional(&self.map.apply(y), &(&self.map.linear * d))
    }
}
