//! Affine-invariant smoothness characteristics over a domain `Q`.
//!
//! * `Δ^(p)`: worst Taylor remainder of order `p` along segments of `Q`,
//!   scaled by `t^{p+1}`;
//! * `𝒱^(p+1)`: largest `|D^{p+1}f(y)[v − x]^{p+1}|` over `x, y, v ∈ Q`;
//! * `Γ^(p)`: variation of the gradient remainder, paired with `v − y`.
//!
//! The sampled estimators return maxima over finite samples, so they are
//! lower bounds on the true suprema. For PSD quadratics on the simplex the
//! suprema are attained at vertices and the atoms-only plan is exact.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::LogSumExp;
use crate::problem::{CompositeProblem, Oracle};
use crate::Point;

/// Which points, segments and step lengths the estimators visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Random convex combinations of the atoms added after the atoms.
    /// Point `i` depends only on the seed and `i`, so a larger plan visits a
    /// superset of a smaller one.
    pub random_points: usize,
    pub t_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { random_points: 50, t_grid: (0..=8).map(|i| 0.5f64.powi(i)).collect(), seed: 0 }
    }
}

impl SamplingPlan {
    /// Vertices only with `t = 1`.
    pub fn atoms_only() -> Self {
        Self { random_points: 0, t_grid: vec![1.0], seed: 0 }
    }

    pub fn method(&self) -> EstimationMethod {
        if self.random_points == 0 {
            EstimationMethod::BruteForceAtoms
        } else {
            EstimationMethod::Sampled
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() || self.t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::InvalidParameter("t-grid must be non-empty and inside (0, 1]".into()));
        }
        Ok(())
    }

    /// Atoms followed by `random_points` Dirichlet(1) combinations of them.
    pub fn points(&self, oracle: &Oracle<'_>) -> Result<Vec<Point>> {
        let atoms = oracle
            .domain()
            .atoms()
            .ok_or(Error::Unsupported("sampling a domain without a finite atom list"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut pts = atoms.clone();
        for _ in 0..self.random_points {
            let weights: Vec<f64> = (0..atoms.len()).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = weights.iter().sum();
            let mut p = DVector::zeros(oracle.domain().dim());
            for (w, a) in weights.iter().zip(&atoms) {
                p.axpy(w / total, a, 1.0);
            }
            pts.push(p);
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMethod {
    ClosedForm,
    BruteForceAtoms,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub order: u32,
    /// `Δ^(p)`.
    pub delta: f64,
    /// `𝒱^(p+1)`.
    pub variation: f64,
    /// `Γ^(p)`.
    pub gamma: f64,
    pub method: EstimationMethod,
}

fn check_order(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("smoothness order must be 1 or 2, got {p}")))
    }
}

fn ordered_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

/// Sampled `Δ^(p)`, `p ∈ {1, 2}`.
pub fn estimate_delta(problem: &CompositeProblem, p: u32, plan: &SamplingPlan) -> Result<f64> {
    check_order(p)?;
    plan.validate()?;
    let o = problem.oracle();
    let pts = plan.points(&o)?;
    let mut best = 0.0f64;
    for (i, x) in pts.iter().enumerate() {
        let fx = o.value(x)?;
        let gx = o.gradient(x)?;
        let hx = if p == 2 { Some(o.hessian(x)?) } else { None };
        for (j, v) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let h = v - x;
            let slope = gx.dot(&h);
            let curvature = hx.as_ref().map_or(0.0, |m| (m * &h).dot(&h));
            for &t in &plan.t_grid {
                let y = x + &h * t;
                let taylor = fx + t * slope + 0.5 * t * t * curvature;
                let r = (o.value(&y)? - taylor).abs() / t.powi(p as i32 + 1);
                best = best.max(r);
            }
        }
    }
    Ok(best)
}

/// Sampled `Γ^(p)`, `p ∈ {1, 2}`, with the remainder
/// `∇f(x + th) − ∇f(x) − [p = 2] t∇²f(x)h`. The pairing point `y` ranges
/// over all atoms, which is exact since the expression is convex in `y`.
pub fn estimate_gamma(problem: &CompositeProblem, p: u32, plan: &SamplingPlan) -> Result<f64> {
    check_order(p)?;
    plan.validate()?;
    let o = problem.oracle();
    let pts = plan.points(&o)?;
    let atoms = o.domain().atoms().ok_or(Error::Unsupported("sampling a domain without a finite atom list"))?;
    let mut best = 0.0f64;
    for (i, x) in pts.iter().enumerate() {
        let gx = o.gradient(x)?;
        let hx = if p == 2 { Some(o.hessian(x)?) } else { None };
        for (j, v) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let h = v - x;
            let hh = hx.as_ref().map(|m| m * &h);
            for &t in &plan.t_grid {
                let mut r = o.gradient(&(x + &h * t))? - &gx;
                if let Some(hh) = &hh {
                    r.axpy(-t, hh, 1.0);
                }
                let rv = r.dot(v);
                let worst = atoms.iter().map(|y| (rv - r.dot(y)).abs()).fold(0.0, f64::max);
                best = best.max(worst / t.powi(p as i32));
            }
        }
    }
    Ok(best)
}

/// Sampled `𝒱^(p+1)`: `|∇²f(y)[h]²|` (p = 1) or `|D³f(y)[h]³|` (p = 2) for
/// `y` in the sample and `h` a difference of sample points.
pub fn estimate_variation(problem: &CompositeProblem, p: u32, plan: &SamplingPlan) -> Result<f64> {
    check_order(p)?;
    let o = problem.oracle();
    let pts = plan.points(&o)?;
    let mut best = 0.0f64;
    for y in &pts {
        let hy = if p == 1 { Some(o.hessian(y)?) } else { None };
        for (i, j) in ordered_pairs(pts.len()) {
            let h = &pts[j] - &pts[i];
            let d = match &hy {
                Some(m) => (m * &h).dot(&h),
                None => o.third_directional(y, &h)?,
            };
            best = best.max(d.abs());
        }
    }
    Ok(best)
}

/// All three characteristics from one plan.
pub fn estimate_constants(problem: &CompositeProblem, p: u32, plan: &SamplingPlan) -> Result<SmoothnessConstants> {
    Ok(SmoothnessConstants {
        order: p,
        delta: estimate_delta(problem, p, plan)?,
        variation: estimate_variation(problem, p, plan)?,
        gamma: estimate_gamma(problem, p, plan)?,
        method: plan.method(),
    })
}

/// `𝒱^(2)` of `½⟨Ax, x⟩ + ⟨b, x⟩` on the simplex:
/// `max_{i,j} A_ii + A_jj − 2A_ij`.
pub fn var_quadratic_simplex(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    ordered_pairs(n).map(|(i, j)| a[(i, i)] + a[(j, j)] - 2.0 * a[(i, j)]).fold(0.0, f64::max)
}

fn is_psd(a: &DMatrix<f64>) -> Result<()> {
    let min = SymmetricEigen::new(a.clone()).eigenvalues.min();
    if min >= -1e-10 {
        Ok(())
    } else {
        Err(Error::NotPositiveSemidefinite(min))
    }
}

/// Exact order-1 constants of a convex quadratic on the simplex:
/// `Γ = 𝒱` and `Δ = 𝒱/2`.
pub fn quadratic_constants_simplex(a: &DMatrix<f64>) -> Result<SmoothnessConstants> {
    is_psd(a)?;
    let v = var_quadratic_simplex(a);
    Ok(SmoothnessConstants { order: 1, delta: 0.5 * v, variation: v, gamma: v, method: EstimationMethod::ClosedForm })
}

/// Bounds on `(𝒱^(2), 𝒱^(3))` for `ln Σ_k exp⟨a_k, x⟩` on the simplex; rows
/// of `a` are the `a_k`. Both use the largest difference between
/// coordinate variations `(a_k⁽ⁱ⁾ − a_k⁽ʲ⁾) − (a_l⁽ⁱ⁾ − a_l⁽ʲ⁾)`.
pub fn var_logsumexp_simplex_bound(a: &DMatrix<f64>) -> (f64, f64) {
    let (m, n) = a.shape();
    let mut d = 0.0f64;
    for k in 0..m {
        for l in 0..m {
            for (i, j) in ordered_pairs(n) {
                let diff = (a[(k, i)] - a[(k, j)]) - (a[(l, i)] - a[(l, j)]);
                d = d.max(diff.abs());
            }
        }
    }
    (d * d, d * d * d)
}

/// The same bounds for the smoothed `μ ln Σ exp((⟨a_k, x⟩ − b_k)/μ)`, which
/// scale by `1/μ` and `1/μ²`.
pub fn var_softmax_simplex_bound(f: &LogSumExp) -> (f64, f64) {
    let (v2, v3) = var_logsumexp_simplex_bound(f.coeffs());
    let mu = f.mu();
    (v2 / mu, v3 / (mu * mu))
}

/// `(𝒱^(2), L_1 𝒟²)` for a quadratic on the simplex, with `L_1 = max |A_ij|`
/// (the ℓ1 → ℓ∞ operator norm, `max A_ii` for PSD `A`) and `𝒟 = 2`.
pub fn lipschitz_bound_check(a: &DMatrix<f64>) -> (f64, f64) {
    let l1 = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (var_quadratic_simplex(a), l1 * SIMPLEX_L1_DIAMETER.powi(2))
}

/// ℓ1 diameter of the simplex.
pub const SIMPLEX_L1_DIAMETER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl ChainEntry {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub entries: Vec<ChainEntry>,
}

impl ChainReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `Γ ≤ 2(p+1)^p/(p!)² · 𝒱`.
pub fn gamma_variation_factor(p: u32) -> f64 {
    2.0 * f64::from(p + 1).powi(p as i32) / factorial(p).powi(2)
}

/// `Δ ≤ 𝒱/(p+1)!`, `Δ ≤ Γ/(p+1)` and `Γ ≤ 2(p+1)^p/(p!)² 𝒱`, each allowed
/// an absolute slack of `tol`.
pub fn check_inequality_chain(c: &SmoothnessConstants, tol: f64) -> ChainReport {
    let p = c.order;
    let entry = |relation: &str, lhs: f64, rhs: f64| ChainEntry {
        relation: relation.to_string(),
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    };
    ChainReport {
        entries: vec![
            entry("delta <= variation / (p+1)!", c.delta, c.variation / factorial(p + 1)),
            entry("delta <= gamma / (p+1)", c.delta, c.gamma / f64::from(p + 1)),
            entry("gamma <= 2 (p+1)^p / (p!)^2 * variation", c.gamma, gamma_variation_factor(p) * c.variation),
        ],
    }
}
