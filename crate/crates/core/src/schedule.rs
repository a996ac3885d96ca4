//! Contraction coefficients `γ_k = a_{k+1} / A_{k+1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical schedule of order `p`: `A_k = k(k+1)…(k+p)`, which gives
/// `γ_k = (p+1)/(k+p+1)` and `γ_0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    order: u32,
}

/// Everything the outer loop needs from the schedule at iteration `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleStep {
    pub gamma: f64,
    /// `a_{k+1}`.
    pub weight: u128,
    /// `A_{k+1}`.
    pub cumulative: u128,
}

impl Schedule {
    pub fn new(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("schedule order must be at least 1".into()));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `A_k = k(k+1)…(k+p)`.
    pub fn cumulative(&self, k: u64) -> u128 {
        (0..=self.order as u64).map(|i| (k + i) as u128).product()
    }

    pub fn gamma(&self, k: u64) -> f64 {
        let p = self.order as f64;
        (p + 1.0) / (k as f64 + p + 1.0)
    }

    pub fn step(&self, k: u64) -> ScheduleStep {
        let cumulative = self.cumulative(k + 1);
        ScheduleStep { gamma: self.gamma(k), weight: cumulative - self.cumulative(k), cumulative }
    }
}
