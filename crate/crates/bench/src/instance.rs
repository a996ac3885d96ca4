//! Seeded SoftMax instances over the simplex.

use std::sync::Arc;

use contracting::{CompositeProblem, LogSumExp, Simplex};
use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::BenchError;

/// `f_μ(x) = μ ln Σᵢ exp((⟨aᵢ, x⟩ − bᵢ)/μ)` with entries of `A` and `b` uniform
/// on `[−1, 1]`.
///
/// Stream order: a `ChaCha8Rng` seeded with `seed_from_u64(seed)` produces
/// `A` row by row, then `b`. Each entry is `2u − 1` with
/// `u = (next_u64 >> 11) · 2⁻⁵³`, so any ChaCha8 implementation reproduces
/// the instance bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMaxInstance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub mu: f64,
    pub seed: u64,
}

fn uniform_pm1(rng: &mut ChaCha8Rng) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}

pub fn generate_instance(n: usize, m: usize, mu: f64, seed: u64) -> Result<SoftMaxInstance, BenchError> {
    if n == 0 || m == 0 {
        return Err(BenchError::Config(format!("n and m must be positive, got n={n}, m={m}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(BenchError::Config(format!("mu must be positive, got {mu}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        rows.push(uniform_pm1(&mut rng));
    }
    let a = DMatrix::from_row_slice(m, n, &rows);
    let b = DVector::from_fn(m, |_, _| uniform_pm1(&mut rng));
    Ok(SoftMaxInstance { a, b, mu, seed })
}

impl SoftMaxInstance {
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn function(&self) -> LogSumExp {
        LogSumExp::new(self.a.clone(), self.b.clone(), self.mu).expect("validated at generation")
    }

    pub fn problem(&self) -> CompositeProblem {
        CompositeProblem::new(Arc::new(self.function()), Arc::new(Simplex::new(self.dim()).expect("n > 0")))
            .expect("dimensions agree")
    }
}
