//! Contracting-point outer schemes.
//!
//! Every method here shares one loop: pick `γ_k`, ask a [`SubproblemSolver`]
//! for a candidate `x̄_{k+1} = (1 − γ_k) x_k + γ_k v̄` that approximately
//! minimizes `f` over the domain contracted towards `x_k`, and keep it only if
//! it does not increase `F`. Optionally the loop maintains the estimating
//! function `φ_k(v) = Σ a_i [f(x̄_i) + ⟨∇f(x̄_i), v − x̄_i⟩ + ψ(v)]`, whose
//! minimum gives the accuracy certificate `ℓ_k = F(x_k) − φ_k*/A_k`.
//!
//! The solvers differ in how the candidate is produced:
//!
//! * [`FrankWolfeStep`] minimizes the linear model exactly with one LMO call
//!   (order `p = 1`, the Frank-Wolfe algorithm);
//! * [`TensorStepP2`] minimizes the quadratic model inexactly with the inner
//!   conditional-gradient loop of [`crate::newton`] (order `p = 2`).

use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::newton::{inner_cg_loop, InnerCap, InnerExit, InnerOptions, InnerStrategy, QuadraticModel};
use crate::problem::{CompositeProblem, Oracle};
use crate::schedule::{Schedule, ScheduleStep};
use crate::trace::{step_accept, RunTrace, TraceRecord};
use crate::Point;

/// Which inexactness condition a solver certifies for its candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InexactnessMode {
    /// Small residual of the contracted subproblem in function value.
    ValueResidual,
    /// Approximate stationarity of the model at the candidate; gives the
    /// certificate its convergence rate.
    Stationarity,
}

/// Aggregated linearizations `φ_k`, stored normalized by `A_k`.
///
/// With ψ an indicator, `φ_k(v)/A_k = β + ⟨s, v⟩` on the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatingFunction {
    cumulative: f64,
    offset: f64,
    slope: DVector<f64>,
    steps: usize,
}

impl EstimatingFunction {
    pub fn new(dim: usize) -> Self {
        Self { cumulative: 0.0, offset: 0.0, slope: DVector::zeros(dim), steps: 0 }
    }

    /// `A_k`.
    pub fn cumulative(&self) -> f64 {
        self.cumulative
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `s_k = Σ a_i ∇f(x̄_i)`.
    pub fn aggregated_gradient(&self) -> DVector<f64> {
        &self.slope * self.cumulative
    }

    /// `β_k = Σ a_i [f(x̄_i) − ⟨∇f(x̄_i), x̄_i⟩]`.
    pub fn aggregated_offset(&self) -> f64 {
        self.offset * self.cumulative
    }

    /// Adds `a_{k+1}[f(x̄) + ⟨∇f(x̄), · − x̄⟩]`.
    pub fn update(&mut self, step: &ScheduleStep, value: f64, gradient: &DVector<f64>, point: &Point) {
        let gamma = step.gamma;
        debug_assert!(self.steps > 0 || gamma == 1.0, "first weight must carry all mass");
        self.offset = (1.0 - gamma) * self.offset + gamma * (value - gradient.dot(point));
        self.slope.scale_mut(1.0 - gamma);
        self.slope.axpy(gamma, gradient, 1.0);
        self.cumulative = step.cumulative as f64;
        self.steps += 1;
    }

    /// `φ_k(v) / A_k`.
    pub fn normalized_value(&self, v: &Point, psi: f64) -> f64 {
        self.offset + self.slope.dot(v) + psi
    }

    /// `φ_k(v)`.
    pub fn value(&self, v: &Point, psi: f64) -> f64 {
        self.cumulative * self.normalized_value(v, psi)
    }

    /// `φ_k* / A_k`, a lower bound on `F*`; one LMO call.
    pub fn normalized_minimum(&self, oracle: &Oracle<'_>) -> Result<f64> {
        let v = oracle.lmo(&self.slope)?;
        let psi = oracle.domain().psi(&v.point);
        Ok(self.normalized_value(&v.point, psi))
    }
}

/// Computable bound on the functional residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `ℓ_k = F(x_k) − φ_k*/A_k ≥ F(x_k) − F*`.
    pub ell: f64,
    /// `φ_k*/A_k ≤ F*`.
    pub lower_bound: f64,
    /// Running maximum of `lower_bound`.
    pub best_lower: f64,
}

/// Fold one more linearization into `ef` and return the refreshed certificate.
#[allow(clippy::too_many_arguments)]
pub fn certificate_update(
    ef: &mut EstimatingFunction,
    step: &ScheduleStep,
    value_at_test: f64,
    gradient_at_test: &DVector<f64>,
    test_point: &Point,
    objective_at_iterate: f64,
    previous: Option<&Certificate>,
    oracle: &Oracle<'_>,
) -> Result<Certificate> {
    let mut next = ef.clone();
    next.update(step, value_at_test, gradient_at_test, test_point);
    let lower_bound = next.normalized_minimum(oracle)?;
    *ef = next;
    let best_lower = previous.map_or(lower_bound, |c| c.best_lower.max(lower_bound));
    Ok(Certificate { ell: objective_at_iterate - lower_bound, lower_bound, best_lower })
}

/// What a solver sees at outer iteration `k`.
pub struct StepContext<'a, 'p> {
    pub oracle: &'a Oracle<'p>,
    pub x: &'a Point,
    pub gamma: f64,
    pub k: usize,
    cached_gradient: Option<&'a DVector<f64>>,
}

impl StepContext<'_, '_> {
    /// `∇f(x_k)`, reusing the value computed for the previous certificate.
    pub fn gradient(&self) -> Result<DVector<f64>> {
        match self.cached_gradient {
            Some(g) => Ok(g.clone()),
            None => self.oracle.gradient(self.x),
        }
    }
}

/// Output of one subproblem solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub v_bar: Point,
    pub x_bar: Point,
    /// Certified model accuracy `ξ_{k+1}` (in the solver's mode).
    pub xi: f64,
    /// `δ_{k+1}` for the outer scheme, when the solver knows the needed
    /// smoothness constant.
    pub delta: Option<f64>,
    pub inner_iters: usize,
    pub t_exit: Option<usize>,
    pub inner_cap_hit: bool,
}

impl Candidate {
    /// Candidate `x̄ = (1 − γ) x + γ v̄`.
    pub fn from_vertex(x: &Point, gamma: f64, v_bar: Point) -> Self {
        let x_bar = x * (1.0 - gamma) + &v_bar * gamma;
        Self { v_bar, x_bar, xi: 0.0, delta: None, inner_iters: 0, t_exit: None, inner_cap_hit: false }
    }
}

/// Approximate minimizer of the contracted subproblem.
pub trait SubproblemSolver {
    fn mode(&self) -> InexactnessMode;

    fn solve(&mut self, ctx: &StepContext<'_, '_>) -> Result<Candidate>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub max_iters: usize,
    /// Maintain `φ_k` and report `ℓ_k` (one extra gradient and LMO per step).
    pub certificate: bool,
    /// Stop once `ℓ_k ≤ tolerance` (requires `certificate`).
    pub tolerance: Option<f64>,
    /// Starting point; the domain center when absent.
    pub x0: Option<Point>,
}

impl RunOptions {
    pub fn new(max_iters: usize, certificate: bool) -> Self {
        Self { max_iters, certificate, tolerance: None, x0: None }
    }
}

/// Outer-iteration state.
#[derive(Debug, Clone)]
pub struct MethodState {
    pub k: usize,
    pub x: Point,
    pub objective: f64,
    pub estimating: EstimatingFunction,
    pub certificate: Option<Certificate>,
    /// `B_k / A_k`.
    pub residual_bound: f64,
    gradient: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub state: MethodState,
}

/// A run that stopped on a solver error; keeps everything recorded so far.
#[derive(Debug, Clone, Error)]
#[error("run aborted at iteration {}: {source}", .state.k)]
pub struct RunFailure {
    #[source]
    pub source: Error,
    pub trace: RunTrace,
    pub state: Box<MethodState>,
}

/// Driver for the conceptual contracting-point scheme with monotone steps.
#[derive(Debug)]
pub struct ContractingPoint<'p> {
    oracle: Oracle<'p>,
    schedule: Schedule,
    options: RunOptions,
    state: MethodState,
    trace: RunTrace,
    elapsed: Duration,
}

impl<'p> ContractingPoint<'p> {
    pub fn new(problem: &'p CompositeProblem, schedule: Schedule, options: RunOptions) -> Result<Self> {
        let start = Instant::now();
        let oracle = problem.oracle();
        let domain = problem.domain();
        let x = match &options.x0 {
            Some(x0) => x0.clone(),
            None => domain.center(),
        };
        if x.len() != problem.dim() {
            return Err(Error::DimensionMismatch { expected: problem.dim(), got: x.len() });
        }
        if !domain.contains(&x) {
            return Err(Error::Infeasible);
        }
        if options.tolerance.is_some() && !options.certificate {
            return Err(Error::InvalidParameter("a certificate tolerance needs certificates enabled".into()));
        }
        let objective = oracle.objective(&x)?;
        let gradient = if options.certificate { Some(oracle.gradient(&x)?) } else { None };
        let state = MethodState {
            k: 0,
            estimating: EstimatingFunction::new(x.len()),
            x,
            objective,
            certificate: None,
            residual_bound: 0.0,
            gradient,
        };
        let mut me = Self { oracle, schedule, options, state, trace: RunTrace { records: vec![], delta_validated: true }, elapsed: Duration::ZERO };
        me.elapsed += start.elapsed();
        let first = me.record(None, false, true);
        me.trace.records.push(first);
        Ok(me)
    }

    pub fn state(&self) -> &MethodState {
        &self.state
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn oracle(&self) -> &Oracle<'p> {
        &self.oracle
    }

    fn record(&self, cand: Option<&Candidate>, accepted: bool, delta_ok: bool) -> TraceRecord {
        let counts = self.oracle.counts();
        let delta = cand.map(|c| c.delta.unwrap_or(c.xi));
        TraceRecord {
            k: self.state.k,
            objective: self.state.objective,
            ell: self.state.certificate.map(|c| c.ell),
            lower_bound: self.state.certificate.map(|c| c.best_lower),
            grad_calls: counts.gradient,
            hess_calls: counts.hessian,
            lmo_calls: counts.lmo,
            inner_iters: cand.map_or(0, |c| c.inner_iters),
            t_exit: cand.and_then(|c| c.t_exit),
            accepted,
            inner_cap_hit: cand.is_some_and(|c| c.inner_cap_hit),
            delta: delta.filter(|_| delta_ok),
            residual_bound: cand.map(|_| self.state.residual_bound),
            wall_ms: self.elapsed.as_secs_f64() * 1e3,
        }
    }

    /// One outer iteration. On error the state is left untouched.
    pub fn step<S: SubproblemSolver + ?Sized>(&mut self, solver: &mut S) -> Result<&TraceRecord> {
        let start = Instant::now();
        let step = self.schedule.step(self.state.k as u64);
        let ctx = StepContext {
            oracle: &self.oracle,
            x: &self.state.x,
            gamma: step.gamma,
            k: self.state.k,
            cached_gradient: self.state.gradient.as_ref(),
        };
        let cand = solver.solve(&ctx)?;
        if cand.x_bar.len() != self.state.x.len() {
            return Err(Error::DimensionMismatch { expected: self.state.x.len(), got: cand.x_bar.len() });
        }
        let domain = self.oracle.domain();
        if !domain.contains(&cand.x_bar) {
            return Err(Error::Infeasible);
        }
        let f_bar = self.oracle.value(&cand.x_bar)?;
        let objective_bar = f_bar + domain.psi(&cand.x_bar);
        let accepted = step_accept(objective_bar, self.state.objective);
        let next_objective = if accepted { objective_bar } else { self.state.objective };

        let mut estimating = self.state.estimating.clone();
        let mut certificate = self.state.certificate;
        let mut grad_bar = None;
        if self.options.certificate {
            let g = self.oracle.gradient(&cand.x_bar)?;
            certificate = Some(certificate_update(
                &mut estimating,
                &step,
                f_bar,
                &g,
                &cand.x_bar,
                next_objective,
                self.state.certificate.as_ref(),
                &self.oracle,
            )?);
            grad_bar = Some(g);
        }

        // Commit.
        let delta_ok = cand.delta.is_some();
        self.trace.delta_validated &= delta_ok;
        let delta = cand.delta.unwrap_or(cand.xi);
        self.state.residual_bound = (1.0 - step.gamma) * self.state.residual_bound + delta;
        self.state.estimating = estimating;
        self.state.certificate = certificate;
        if accepted {
            self.state.x = cand.x_bar.clone();
            self.state.objective = objective_bar;
            self.state.gradient = grad_bar;
        } else if !self.options.certificate {
            self.state.gradient = None;
        }
        self.state.k += 1;
        self.elapsed += start.elapsed();
        let rec = self.record(Some(&cand), accepted, delta_ok);
        self.trace.records.push(rec);
        Ok(self.trace.records.last().expect("just pushed"))
    }

    /// Iterate until `max_iters` or the certificate tolerance.
    pub fn run<S: SubproblemSolver + ?Sized>(mut self, solver: &mut S) -> std::result::Result<RunOutcome, RunFailure> {
        while self.state.k < self.options.max_iters {
            if let Err(source) = self.step(solver) {
                return Err(RunFailure { source, trace: self.trace, state: Box::new(self.state) });
            }
            if let (Some(tol), Some(c)) = (self.options.tolerance, self.state.certificate) {
                if c.ell <= tol {
                    break;
                }
            }
        }
        Ok(RunOutcome { trace: self.trace, state: self.state })
    }
}

/// Run any solver under the canonical schedule of the given order.
pub fn run_contracting<S: SubproblemSolver + ?Sized>(
    problem: &CompositeProblem,
    order: u32,
    solver: &mut S,
    options: RunOptions,
) -> std::result::Result<RunOutcome, RunFailure> {
    let schedule = Schedule::new(order).map_err(|source| failure_before_start(problem, source))?;
    let driver = ContractingPoint::new(problem, schedule, options).map_err(|source| failure_before_start(problem, source))?;
    driver.run(solver)
}

pub(crate) fn failure_before_start(problem: &CompositeProblem, source: Error) -> RunFailure {
    let x = problem.domain().center();
    RunFailure {
        source,
        trace: RunTrace::default(),
        state: Box::new(MethodState {
            k: 0,
            estimating: EstimatingFunction::new(x.len()),
            x,
            objective: f64::NAN,
            certificate: None,
            residual_bound: 0.0,
            gradient: None,
        }),
    }
}

/// Linear-model step: `v̄ = LMO(∇f(x_k))`.
///
/// The linear model is minimized exactly, so `ξ = 0` in either mode. The
/// optional constant is `Δ^(1)` in value mode (`δ = 2Δγ²`) and `Γ^(1)` in
/// stationarity mode (`δ = Γγ²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrankWolfeStep {
    pub mode: InexactnessMode,
    pub smoothness: Option<f64>,
}

impl Default for FrankWolfeStep {
    fn default() -> Self {
        Self { mode: InexactnessMode::ValueResidual, smoothness: None }
    }
}

fn delta_bound(mode: InexactnessMode, xi: f64, constant: Option<f64>, gamma: f64, order: i32) -> Option<f64> {
    constant.map(|kappa| {
        let factor = match mode {
            InexactnessMode::ValueResidual => 2.0,
            InexactnessMode::Stationarity => 1.0,
        };
        xi + factor * kappa * gamma.powi(order + 1)
    })
}

impl SubproblemSolver for FrankWolfeStep {
    fn mode(&self) -> InexactnessMode {
        self.mode
    }

    fn solve(&mut self, ctx: &StepContext<'_, '_>) -> Result<Candidate> {
        let g = ctx.gradient()?;
        let v = ctx.oracle.lmo(&g)?;
        let mut cand = Candidate::from_vertex(ctx.x, ctx.gamma, v.point);
        cand.inner_iters = 1;
        cand.delta = delta_bound(self.mode, 0.0, self.smoothness, ctx.gamma, 1);
        Ok(cand)
    }
}

/// Frank-Wolfe with `γ_k = 2/(k+2)` and monotone acceptance.
pub fn frank_wolfe_run(
    problem: &CompositeProblem,
    iters: usize,
    certificate: bool,
) -> std::result::Result<RunOutcome, RunFailure> {
    run_contracting(problem, 1, &mut FrankWolfeStep::default(), RunOptions::new(iters, certificate))
}

/// What to do when the inner loop exhausts its cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPolicy {
    /// Surface [`Error::InnerCapExceeded`].
    Fail,
    /// Propose `x̄ = x_k` and flag the step.
    KeepCurrent,
}

/// Second-order contracting step: minimize the quadratic model
/// `g_k(v) = ⟨∇f(x_k), v − x_k⟩ + (γ_k/2)⟨∇²f(x_k)(v − x_k), v − x_k⟩`
/// over the domain to accuracy `c γ_k²` with the inner conditional-gradient
/// loop.
///
/// In value mode the inner loop stops on its estimating-function gap, which
/// bounds `m_k(v̄) − m_k*`; in stationarity mode it stops on the model's
/// Frank-Wolfe gap at `v̄`. The optional constant is `Δ^(2)` (value mode) or
/// `Γ^(2)` (stationarity mode).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorStepP2 {
    pub c: f64,
    pub mode: InexactnessMode,
    pub smoothness: Option<f64>,
    pub cap: InnerCap,
    pub strategy: InnerStrategy,
    pub on_cap: CapPolicy,
}

impl TensorStepP2 {
    fn with_mode(c: f64, mode: InexactnessMode) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance constant c must be positive, got {c}")));
        }
        Ok(Self {
            c,
            mode,
            smoothness: None,
            cap: InnerCap::Auto { variation: None },
            strategy: InnerStrategy::Recurrence,
            on_cap: CapPolicy::Fail,
        })
    }

    /// Value-residual variant (the inexact contracting Newton step).
    pub fn value_residual(c: f64) -> Result<Self> {
        Self::with_mode(c, InexactnessMode::ValueResidual)
    }

    /// Stationarity variant; its certificates decay at the `k⁻²` rate.
    pub fn stationarity(c: f64) -> Result<Self> {
        Self::with_mode(c, InexactnessMode::Stationarity)
    }

    pub fn inner_exit(&self) -> InnerExit {
        match self.mode {
            InexactnessMode::ValueResidual => InnerExit::ValueResidual,
            InexactnessMode::Stationarity => InnerExit::Stationarity,
        }
    }
}

impl SubproblemSolver for TensorStepP2 {
    fn mode(&self) -> InexactnessMode {
        self.mode
    }

    fn solve(&mut self, ctx: &StepContext<'_, '_>) -> Result<Candidate> {
        let gamma = ctx.gamma;
        let grad = ctx.gradient()?;
        let hess = ctx.oracle.hessian(ctx.x)?;
        let model = QuadraticModel::new(ctx.x.clone(), gamma, grad, hess)?;
        let opts = InnerOptions {
            target: self.c * gamma * gamma,
            exit: self.inner_exit(),
            cap: self.cap.limit(self.c, gamma),
            strategy: self.strategy,
            record_path: false,
        };
        match inner_cg_loop(&model, ctx.oracle, &opts) {
            Ok(res) => {
                let xi = gamma * res.gap.max(0.0);
                let mut cand = Candidate::from_vertex(ctx.x, gamma, res.point);
                cand.xi = xi;
                cand.delta = delta_bound(self.mode, xi, self.smoothness, gamma, 2);
                cand.inner_iters = res.inner_iters;
                cand.t_exit = Some(res.t_exit);
                Ok(cand)
            }
            Err(Error::InnerCapExceeded { .. }) if self.on_cap == CapPolicy::KeepCurrent => Ok(Candidate {
                v_bar: ctx.x.clone(),
                x_bar: ctx.x.clone(),
                xi: 0.0,
                delta: None,
                inner_iters: opts.cap,
                t_exit: None,
                inner_cap_hit: true,
            }),
            Err(e) => Err(e),
        }
    }
}

/// One value-residual p = 2 candidate from `x` with contraction `gamma`.
pub fn tensor_step_p2_value(oracle: &Oracle<'_>, x: &Point, gamma: f64, c: f64) -> Result<Candidate> {
    let ctx = StepContext { oracle, x, gamma, k: 0, cached_gradient: None };
    TensorStepP2::value_residual(c)?.solve(&ctx)
}

/// One stationarity p = 2 candidate from `x` with contraction `gamma`.
pub fn tensor_step_p2_stationarity(oracle: &Oracle<'_>, x: &Point, gamma: f64, c: f64) -> Result<Candidate> {
    let ctx = StepContext { oracle, x, gamma, k: 0, cached_gradient: None };
    TensorStepP2::stationarity(c)?.solve(&ctx)
}
