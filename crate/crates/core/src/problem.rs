//! Composite problem `F = f + ψ` and counted access to its oracles.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{AtomicDomain, Vertex};
use crate::error::{Error, Result};
use crate::functions::SmoothFunction;
use crate::Point;

/// Thread-safe call counters, one per evaluator.
#[derive(Debug, Default)]
pub struct CallCounters {
    value: AtomicU64,
    gradient: AtomicU64,
    hessian: AtomicU64,
    hessian_vec: AtomicU64,
    lmo: AtomicU64,
}

/// Plain snapshot of [`CallCounters`].
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub value: u64,
    pub gradient: u64,
    pub hessian: u64,
    pub hessian_vec: u64,
    pub lmo: u64,
}

impl CallCounters {
    pub fn snapshot(&self) -> CallCounts {
        CallCounts {
            value: self.value.load(Ordering::Relaxed),
            gradient: self.gradient.load(Ordering::Relaxed),
            hessian: self.hessian.load(Ordering::Relaxed),
            hessian_vec: self.hessian_vec.load(Ordering::Relaxed),
            lmo: self.lmo.load(Ordering::Relaxed),
        }
    }

    fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }
}

/// `min f(x) + ψ(x)` over a bounded atomic domain.
///
/// Immutable apart from the lifetime call counters; share it behind an `Arc`
/// or a reference across concurrent runs.
#[derive(Debug)]
pub struct CompositeProblem {
    smooth: Arc<dyn SmoothFunction>,
    domain: Arc<dyn AtomicDomain>,
    counters: CallCounters,
}

impl CompositeProblem {
    pub fn new(smooth: Arc<dyn SmoothFunction>, domain: Arc<dyn AtomicDomain>) -> Result<Self> {
        if smooth.dim() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: smooth.dim() });
        }
        Ok(Self { smooth, domain, counters: CallCounters::default() })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn smooth(&self) -> &Arc<dyn SmoothFunction> {
        &self.smooth
    }

    pub fn domain(&self) -> &Arc<dyn AtomicDomain> {
        &self.domain
    }

    /// Lifetime totals over every run that used this problem.
    pub fn counts(&self) -> CallCounts {
        self.counters.snapshot()
    }

    /// A fresh counting view for one run.
    pub fn oracle(&self) -> Oracle<'_> {
        Oracle { problem: self, local: CallCounters::default() }
    }
}

/// Counting, validating view of a [`CompositeProblem`].
///
/// Every call bumps both the problem's lifetime counters and this view's
/// own counters, so per-run accounting stays exact when several runs share
/// the problem.
#[derive(Debug)]
pub struct Oracle<'p> {
    problem: &'p CompositeProblem,
    local: CallCounters,
}

fn finite_vec(v: DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite { what })
    }
}

impl<'p> Oracle<'p> {
    pub fn problem(&self) -> &'p CompositeProblem {
        self.problem
    }

    pub fn domain(&self) -> &'p dyn AtomicDomain {
        self.problem.domain.as_ref()
    }

    pub fn counts(&self) -> CallCounts {
        self.local.snapshot()
    }

    fn check(&self, x: &Point) -> Result<()> {
        let n = self.problem.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "query point" });
        }
        Ok(())
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        CallCounters::bump(&self.local.value);
        CallCounters::bump(&self.problem.counters.value);
        let v = self.problem.smooth.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { what: "function value" })
        }
    }

    /// `F(x) = f(x) + ψ(x)`.
    pub fn objective(&self, x: &Point) -> Result<f64> {
        Ok(self.value(x)? + self.problem.domain.psi(x))
    }

    pub fn gradient(&self, x: &Point) -> Result<DVector<f64>> {
        self.check(x)?;
        CallCounters::bump(&self.local.gradient);
        CallCounters::bump(&self.problem.counters.gradient);
        finite_vec(self.problem.smooth.gradient(x), "gradient")
    }

    pub fn hessian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.check(x)?;
        CallCounters::bump(&self.local.hessian);
        CallCounters::bump(&self.problem.counters.hessian);
        let h = self.problem.smooth.hessian(x);
        if h.iter().all(|v| v.is_finite()) {
            Ok(h)
        } else {
            Err(Error::NonFinite { what: "Hessian" })
        }
    }

    pub fn hessian_vec(&self, x: &Point, h: &Point) -> Result<DVector<f64>> {
        self.check(x)?;
        CallCounters::bump(&self.local.hessian_vec);
        CallCounters::bump(&self.problem.counters.hessian_vec);
        finite_vec(self.problem.smooth.hessian_vec(x, h), "Hessian-vector product")
    }

    pub fn third_directional(&self, x: &Point, h: &Point) -> Result<f64> {
        self.check(x)?;
        self.problem
            .smooth
            .third_directional(x, h)
            .ok_or(Error::Unsupported("a third directional derivative"))
    }

    pub fn lmo(&self, g: &DVector<f64>) -> Result<Vertex> {
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "LMO direction" });
        }
        CallCounters::bump(&self.local.lmo);
        CallCounters::bump(&self.problem.counters.lmo);
        self.problem.domain.lmo(g)
    }
}
