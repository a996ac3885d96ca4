//! Per-iteration run records.

use serde::{Deserialize, Serialize};

/// Monotone acceptance test: keep the candidate iff it does not increase `F`.
pub fn step_accept(candidate: f64, current: f64) -> bool {
    candidate <= current
}

/// State after outer iteration `k` (record `k = 0` is the starting point).
///
/// Call counts and wall time are cumulative since the start of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    /// `F(x_k)`.
    pub objective: f64,
    /// Accuracy certificate `ℓ_k`, an upper bound on `F(x_k) − F*`.
    pub ell: Option<f64>,
    /// Running best lower bound `max_{i ≤ k} φ_i* / A_i` on `F*`.
    pub lower_bound: Option<f64>,
    pub grad_calls: u64,
    pub hess_calls: u64,
    pub lmo_calls: u64,
    /// Inner iterations spent in this outer step.
    pub inner_iters: usize,
    /// Inner counter `t` at which the inner exit test passed.
    pub t_exit: Option<usize>,
    pub accepted: bool,
    pub inner_cap_hit: bool,
    /// Inexactness `δ_k` of this step, when a smoothness constant was supplied.
    pub delta: Option<f64>,
    /// `B_k / A_k = (1/A_k) Σ A_i δ_i`, the residual bound implied by the δ's.
    pub residual_bound: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    /// False when some step could not report a validated `δ`.
    pub delta_validated: bool,
}

impl RunTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }

    /// `F(x_{k+1}) ≤ F(x_k)` for every recorded step, compared exactly.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].objective <= w[0].objective)
    }

    pub fn best_lower_bound(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.lower_bound).fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// Least-squares slope of `log ℓ_k` against `log k` over `k ∈ [lo, hi]`.
    /// Non-positive certificates are skipped.
    pub fn certificate_slope(&self, lo: usize, hi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.k >= lo.max(1) && r.k <= hi)
            .filter_map(|r| r.ell.filter(|&e| e > 0.0).map(|e| ((r.k as f64).ln(), e.ln())))
            .collect();
        loglog_fit(&pts)
    }

    /// First recorded `k` with `ℓ_k ≤ eps`.
    pub fn first_certified(&self, eps: f64) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.ell.is_some_and(|e| e <= eps))
    }
}

fn loglog_fit(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
