//! Two-sided bracket on the optimal value from long certified runs.

use contracting::methods::{frank_wolfe_run, CapPolicy, InexactnessMode};
use contracting::newton::{icn_run, IcnOptions};
use contracting::{CompositeProblem, RunTrace};
use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const MIN_BUDGET: usize = 10_000;

/// ICN gets this fraction of the FW iteration budget; its steps are far more
/// expensive and it converges much faster.
const ICN_SHARE: usize = 10;
const ICN_C: f64 = 0.2;

/// `lower ≤ F* ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub upper: f64,
    pub lower: f64,
}

impl Reference {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

fn bounds(trace: &RunTrace) -> Reference {
    Reference {
        upper: trace.objectives().fold(f64::INFINITY, f64::min),
        lower: trace.best_lower_bound().unwrap_or(f64::NEG_INFINITY),
    }
}

/// Best objective value and best certificate lower bound over a `budget`-step
/// Frank-Wolfe run and a `budget/10`-step contracting Newton run.
pub fn reference_solution(problem: &CompositeProblem, budget: usize) -> Result<Reference, BenchError> {
    if budget < MIN_BUDGET {
        return Err(BenchError::Config(format!("reference budget must be at least {MIN_BUDGET}, got {budget}")));
    }
    let fw = frank_wolfe_run(problem, budget, true).map_err(|f| f.source)?;
    let mut opts = IcnOptions::new(ICN_C, budget / ICN_SHARE, true);
    opts.mode = InexactnessMode::ValueResidual;
    opts.on_cap = CapPolicy::KeepCurrent;
    let icn = icn_run(problem, &opts).map_err(|f| f.source)?;
    let (a, b) = (bounds(&fw.trace), bounds(&icn.trace));
    let upper = a.upper.min(b.upper);
    // Rounding in the certificate can put the lower bound a few ulps above
    // an exact optimum; F* ≤ upper, so clamping keeps it valid.
    Ok(Reference { upper, lower: a.lower.max(b.lower).min(upper) })
}
