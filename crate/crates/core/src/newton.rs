//! Inexact contracting Newton method.
//!
//! Each outer step minimizes the quadratic model
//! `g_k(v) = ⟨∇f(x_k), v − x_k⟩ + (γ_k/2)⟨∇²f(x_k)(v − x_k), v − x_k⟩`
//! over the domain with a conditional-gradient inner loop that keeps its own
//! estimating function, and stops once the gap `g_k(z) + ψ(z) − φ*` falls
//! below `c γ_k²`.
//!
//! On domains whose atoms are coordinate vectors the inner step is `O(n)`:
//! `∇²f(x_k) e_j` is a Hessian column, the model gradient follows a
//! recurrence, and the model value is recovered from the gradient.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{failure_before_start, run_contracting, CapPolicy, InexactnessMode, RunFailure, RunOptions, RunOutcome, TensorStepP2};
use crate::problem::{CompositeProblem, Oracle};
use crate::Point;

/// Dense Hessian with access counters.
#[derive(Debug, Clone)]
pub struct HessianCache {
    matrix: DMatrix<f64>,
    column_reads: Cell<u64>,
    products: Cell<u64>,
}

impl HessianCache {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        Ok(Self { matrix, column_reads: Cell::new(0), products: Cell::new(0) })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `∇²f(x_k) e_j`.
    pub fn column(&self, j: usize) -> DVector<f64> {
        self.column_reads.set(self.column_reads.get() + 1);
        self.matrix.column(j).into_owned()
    }

    /// Full product `∇²f(x_k) v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.products.set(self.products.get() + 1);
        &self.matrix * v
    }

    pub fn column_reads(&self) -> u64 {
        self.column_reads.get()
    }

    pub fn products(&self) -> u64 {
        self.products.get()
    }
}

/// Second-order model `g_k` around `x_k` with contraction `γ_k`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    center: Point,
    gamma: f64,
    gradient: DVector<f64>,
    hessian: HessianCache,
    hessian_center: DVector<f64>,
}

impl QuadraticModel {
    /// Caches `∇²f(x_k) x_k` with one product.
    pub fn new(center: Point, gamma: f64, gradient: DVector<f64>, hessian: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if gradient.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: gradient.len() });
        }
        if hessian.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: hessian.nrows() });
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("contraction must lie in [0, 1], got {gamma}")));
        }
        let hessian = HessianCache::new(hessian)?;
        let hessian_center = hessian.apply(&center);
        Ok(Self { center, gamma, gradient, hessian, hessian_center })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn base_gradient(&self) -> &DVector<f64> {
        &self.gradient
    }

    pub fn hessian(&self) -> &HessianCache {
        &self.hessian
    }

    /// `∇g_k(v) = ∇f(x_k) + γ_k ∇²f(x_k)(v − x_k)`, one full product.
    pub fn gradient(&self, v: &Point) -> DVector<f64> {
        let hv = self.hessian.apply(v);
        &self.gradient + (hv - &self.hessian_center) * self.gamma
    }

    /// `∇g_k` at a domain atom. A coordinate atom costs one Hessian column.
    pub fn atom_gradient(&self, atom: &Point, coordinate: Option<usize>) -> DVector<f64> {
        let hw = match coordinate {
            Some(j) => self.hessian.column(j),
            None => self.hessian.apply(atom),
        };
        &self.gradient + (hw - &self.hessian_center) * self.gamma
    }

    /// Direct evaluation of `g_k(v)`.
    pub fn value(&self, v: &Point) -> f64 {
        let d = v - &self.center;
        let hd = self.hessian.apply(&d);
        self.gradient.dot(&d) + 0.5 * self.gamma * hd.dot(&d)
    }

    /// `g_k(z) = ½⟨∇f(x_k) + ∇g_k(z), z − x_k⟩`, exact for a quadratic.
    pub fn value_from_gradient(&self, z: &Point, grad_z: &DVector<f64>) -> f64 {
        0.5 * (&self.gradient + grad_z).dot(&(z - &self.center))
    }
}

/// Inner exit test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerExit {
    /// `g_k(z_{t+1}) + ψ(z_{t+1}) − φ_{t+1}* ≤ target`; bounds `m_k(z) − m_k*`.
    ValueResidual,
    /// `max_w ⟨∇g_k(z_{t+1}), z_{t+1} − w⟩ ≤ target`; one extra LMO per step.
    Stationarity,
}

/// How the inner loop refreshes `∇g_k(z_{t+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStrategy {
    /// Convex-combination recurrence; one Hessian column per step on
    /// coordinate atoms.
    Recurrence,
    /// Recompute `∇f(x_k) + γ_k ∇²f(x_k)(z − x_k)` with a full product.
    Dense,
}

/// Inner iteration limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerCap {
    /// `10·(2𝒱/(cγ) + 1)` when an estimate of `𝒱^(2)` is known, else `10⁴`.
    Auto { variation: Option<f64> },
    Fixed(usize),
}

impl InnerCap {
    pub const DEFAULT: usize = 10_000;

    pub fn limit(&self, c: f64, gamma: f64) -> usize {
        match *self {
            InnerCap::Fixed(n) => n,
            InnerCap::Auto { variation: Some(v) } if v.is_finite() && v >= 0.0 => {
                let raw = 10.0 * (2.0 * v / (c * gamma) + 1.0);
                if raw.is_finite() && raw < usize::MAX as f64 {
                    raw.ceil() as usize
                } else {
                    usize::MAX
                }
            }
            InnerCap::Auto { .. } => Self::DEFAULT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerOptions {
    /// Exit threshold, `c γ_k²`.
    pub target: f64,
    pub exit: InnerExit,
    pub cap: usize,
    pub strategy: InnerStrategy,
    /// Keep every inner iterate in [`InnerResult::path`].
    pub record_path: bool,
}

/// One inner iteration `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerStep {
    pub t: usize,
    /// `z_{t+1}`.
    pub z: Point,
    /// `∇g_k(z_{t+1})` as maintained by the loop.
    pub grad: DVector<f64>,
    /// `g_k(z_{t+1})`.
    pub model_value: f64,
    /// `φ_{t+1}*`.
    pub phi_star: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    /// `v̄ = z_{t+1}`.
    pub point: Point,
    pub t_exit: usize,
    pub inner_iters: usize,
    pub gap: f64,
    pub model_value: f64,
    pub phi_star: f64,
    pub path: Vec<InnerStep>,
}

/// Conditional-gradient minimization of `g_k + ψ` with `α_t = 2/(t+2)`.
///
/// `φ_{t+1}` is kept as `β + ⟨h, w⟩ + ψ(w)`; `w_{t+1}` is one LMO on `h_t`.
pub fn inner_cg_loop(model: &QuadraticModel, oracle: &Oracle<'_>, opts: &InnerOptions) -> Result<InnerResult> {
    if opts.target.is_nan() || opts.target <= 0.0 {
        return Err(Error::InvalidParameter(format!("inner target must be positive, got {}", opts.target)));
    }
    let domain = oracle.domain();
    let coordinate = domain.has_coordinate_atoms();
    let n = model.center.len();

    let mut z = model.center.clone();
    let mut grad = model.gradient.clone();
    let mut value = 0.0;
    let mut beta = 0.0;
    let mut h = DVector::zeros(n);
    let mut best_gap = f64::INFINITY;
    let mut path = Vec::new();

    for t in 0..opts.cap {
        let alpha = 2.0 / (t as f64 + 2.0);
        beta = alpha * (value - grad.dot(&z)) + (1.0 - alpha) * beta;
        h.scale_mut(1.0 - alpha);
        h.axpy(alpha, &grad, 1.0);
        let w = oracle.lmo(&h)?;
        let phi_star = beta + h.dot(&w.point) + domain.psi(&w.point);

        let z_next = &w.point * alpha + &z * (1.0 - alpha);
        let grad_next = match opts.strategy {
            InnerStrategy::Recurrence => {
                let gw = model.atom_gradient(&w.point, w.index.filter(|_| coordinate));
                gw * alpha + &grad * (1.0 - alpha)
            }
            InnerStrategy::Dense => model.gradient(&z_next),
        };
        let value_next = model.value_from_gradient(&z_next, &grad_next);
        let psi_next = domain.psi(&z_next);
        let gap = match opts.exit {
            InnerExit::ValueResidual => value_next + psi_next - phi_star,
            InnerExit::Stationarity => {
                let u = oracle.lmo(&grad_next)?;
                grad_next.dot(&(&z_next - &u.point)) + psi_next - domain.psi(&u.point)
            }
        };
        best_gap = best_gap.min(gap);
        if opts.record_path {
            path.push(InnerStep {
                t,
                z: z_next.clone(),
                grad: grad_next.clone(),
                model_value: value_next,
                phi_star,
                gap,
            });
        }
        if gap <= opts.target {
            return Ok(InnerResult {
                point: z_next,
                t_exit: t,
                inner_iters: t + 1,
                gap,
                model_value: value_next,
                phi_star,
                path,
            });
        }
        z = z_next;
        grad = grad_next;
        value = value_next;
    }
    Err(Error::InnerCapExceeded { cap: opts.cap, best_gap, target: opts.target })
}

/// Worst-case inner gap after iteration `t` for a model with variation `𝒱`:
/// `(γ𝒱/2) Σ_{i≤t} 4(i+1)/(i+2) / ((t+1)(t+2))`.
pub fn inner_gap_bound(gamma: f64, variation: f64, t: usize) -> f64 {
    let sum: f64 = (0..=t).map(|i| 4.0 * (i as f64 + 1.0) / (i as f64 + 2.0)).sum();
    0.5 * gamma * variation * sum / ((t as f64 + 1.0) * (t as f64 + 2.0))
}

/// Inner iterations sufficient for the exit test: `⌈2𝒱/(cγ)⌉ + 1`.
pub fn inner_iteration_bound(c: f64, gamma: f64, variation: f64) -> usize {
    (2.0 * variation / (c * gamma)).ceil() as usize + 1
}

/// Smallest admissible `c`.
pub const MIN_C: f64 = 1e-6;

/// Default `c` when a smoothness constant is unknown.
pub const DEFAULT_C: f64 = 1.0;

/// `c = 2√(𝒱^(2) Δ^(2))`, which balances inner and outer work.
pub fn choose_c(variation: Option<f64>, delta: Option<f64>) -> Result<f64> {
    for v in [variation, delta].into_iter().flatten() {
        if v < 0.0 || v.is_nan() {
            return Err(Error::InvalidParameter(format!("smoothness constants must be non-negative, got {v}")));
        }
    }
    match (variation, delta) {
        (Some(v), Some(d)) => Ok((2.0 * (v * d).sqrt()).max(MIN_C)),
        _ => Ok(DEFAULT_C),
    }
}

/// Oracle budgets for reaching accuracy `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcnBudget {
    /// `K = ⌈√(27(c + 2Δ)/ε)⌉` outer iterations (gradient and Hessian calls).
    pub outer: u64,
    /// `2(1 + 2𝒱/c)(1 + 27(c + 2Δ)/ε)` LMO calls.
    pub lmo_calls: f64,
}

pub fn icn_budget(c: f64, variation: f64, delta: f64, eps: f64) -> Result<IcnBudget> {
    if !(c > 0.0 && eps > 0.0 && variation >= 0.0 && delta >= 0.0) {
        return Err(Error::InvalidParameter("budgets need c, ε > 0 and non-negative constants".into()));
    }
    let ratio = 27.0 * (c + 2.0 * delta) / eps;
    Ok(IcnBudget {
        outer: ratio.sqrt().ceil() as u64,
        lmo_calls: 2.0 * (1.0 + 2.0 * variation / c) * (1.0 + ratio),
    })
}

/// Configuration of [`icn_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct IcnOptions {
    pub c: f64,
    pub iters: usize,
    pub certificate: bool,
    pub mode: InexactnessMode,
    /// `Δ^(2)` in value mode, `Γ^(2)` in stationarity mode.
    pub smoothness: Option<f64>,
    pub cap: InnerCap,
    pub strategy: InnerStrategy,
    pub on_cap: CapPolicy,
    pub tolerance: Option<f64>,
    pub x0: Option<Point>,
}

impl IcnOptions {
    pub fn new(c: f64, iters: usize, certificate: bool) -> Self {
        Self {
            c,
            iters,
            certificate,
            mode: InexactnessMode::ValueResidual,
            smoothness: None,
            cap: InnerCap::Auto { variation: None },
            strategy: InnerStrategy::Recurrence,
            on_cap: CapPolicy::Fail,
            tolerance: None,
            x0: None,
        }
    }

    pub fn solver(&self) -> Result<TensorStepP2> {
        let mut s = match self.mode {
            InexactnessMode::ValueResidual => TensorStepP2::value_residual(self.c)?,
            InexactnessMode::Stationarity => TensorStepP2::stationarity(self.c)?,
        };
        s.smoothness = self.smoothness;
        s.cap = self.cap;
        s.strategy = self.strategy;
        s.on_cap = self.on_cap;
        Ok(s)
    }
}

/// Inexact contracting Newton method with `γ_k = 3/(k+3)`.
pub fn icn_run(problem: &CompositeProblem, opts: &IcnOptions) -> std::result::Result<RunOutcome, RunFailure> {
    let mut solver = opts.solver().map_err(|e| failure_before_start(problem, e))?;
    let run = RunOptions { max_iters: opts.iters, certificate: opts.certificate, tolerance: opts.tolerance, x0: opts.x0.clone() };
    run_contracting(problem, 2, &mut solver, run)
}
