//! Affine-invariant contracting-point methods for composite convex problems
//! `min f(x) + ψ(x)` over a bounded domain.
//!
//! The feasible set is only touched through a linear minimization oracle
//! ([`AtomicDomain::lmo`]), so every method here is projection-free. The
//! family covers:
//!
//! * the generic contracting-point outer loop with monotone acceptance and an
//!   optional accuracy certificate ([`methods`]),
//! * Frank-Wolfe as its first-order instance ([`methods::frank_wolfe_run`]),
//! * the inexact contracting Newton method, whose quadratic models are
//!   minimized by an inner conditional-gradient loop ([`newton`]),
//! * estimators for the affine-invariant smoothness characteristics that
//!   drive the complexity bounds ([`smoothness`]),
//! * bounds for symmetric multilinear forms over convex sets ([`multilinear`]).

pub mod domain;
pub mod error;
pub mod functions;
pub mod methods;
pub mod multilinear;
pub mod newton;
pub mod problem;
pub mod schedule;
pub mod smoothness;
pub mod trace;

pub use domain::{AffineImage, AtomicDomain, Simplex, Vertex, FEASIBILITY_TOL};
pub use error::{Error, Result};
pub use functions::{AffineMap, AffinePullback, Linear, LogSumExp, Quadratic, SmoothFunction};
pub use problem::{CallCounters, CallCounts, CompositeProblem, Oracle};
pub use schedule::{Schedule, ScheduleStep};
pub use trace::{step_accept, RunTrace, TraceRecord};

/// Dense coordinate vector used for iterates, test points and directions.
pub type Point = nalgebra::DVector<f64>;
