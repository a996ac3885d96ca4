//! Bounded feasible sets accessed through a linear minimization oracle.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::functions::AffineMap;
use crate::Point;

/// Absolute slack allowed per constraint in membership checks. Convex
/// combinations computed in floating point drift off the boundary by a few
/// ulps per step.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Answer of a linear minimization oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    /// Index into the domain's atom list, when the domain has one.
    pub index: Option<usize>,
    pub point: Point,
}

/// Bounded convex set presented through its linear minimization oracle.
///
/// The composite term ψ is the `{0, +∞}` indicator of the set. `psi` and
/// `composite_lmo` are the hooks a general simple ψ would override.
pub trait AtomicDomain: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// A minimizer of `⟨g, v⟩` over the set. Ties between atoms go to the
    /// smallest index.
    fn lmo(&self, g: &DVector<f64>) -> Result<Vertex>;

    /// Number of extreme points when the set is a polytope given by atoms.
    fn num_atoms(&self) -> Option<usize> {
        None
    }

    fn atom(&self, _index: usize) -> Option<Point> {
        None
    }

    /// Membership up to [`FEASIBILITY_TOL`].
    fn contains(&self, x: &Point) -> bool;

    /// Default starting point.
    fn center(&self) -> Point;

    /// True when atom `j` is the coordinate vector `e_j`, so that a Hessian
    /// applied to an atom is a single column.
    fn has_coordinate_atoms(&self) -> bool {
        false
    }

    /// ψ on the domain (zero for an indicator).
    fn psi(&self, _x: &Point) -> f64 {
        0.0
    }

    /// `argmin_v ⟨g, v⟩ + ψ(v)` together with `ψ(v)`.
    fn composite_lmo(&self, g: &DVector<f64>) -> Result<(Vertex, f64)> {
        let v = self.lmo(g)?;
        let psi = self.psi(&v.point);
        Ok((v, psi))
    }

    fn atoms(&self) -> Option<Vec<Point>> {
        let m = self.num_atoms()?;
        (0..m).map(|i| self.atom(i)).collect()
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Index of the smallest entry, first one on ties.
fn argmin_first<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v < best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Standard simplex `{x ≥ 0 : Σ xᵢ = 1}` with atoms `e_1, …, e_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simplex {
    n: usize,
}

impl Simplex {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("simplex dimension must be positive".into()));
        }
        Ok(Self { n })
    }

    pub fn vertex(&self, j: usize) -> Point {
        let mut e = DVector::zeros(self.n);
        e[j] = 1.0;
        e
    }
}

impl AtomicDomain for Simplex {
    fn dim(&self) -> usize {
        self.n
    }

    fn lmo(&self, g: &DVector<f64>) -> Result<Vertex> {
        check_dim(self.n, g.len())?;
        let j = argmin_first(g.iter().copied());
        Ok(Vertex { index: Some(j), point: self.vertex(j) })
    }

    fn num_atoms(&self) -> Option<usize> {
        Some(self.n)
    }

    fn atom(&self, index: usize) -> Option<Point> {
        (index < self.n).then(|| self.vertex(index))
    }

    fn contains(&self, x: &Point) -> bool {
        x.len() == self.n
            && x.iter().all(|&xi| xi.is_finite() && xi >= -FEASIBILITY_TOL)
            && (x.sum() - 1.0).abs() <= FEASIBILITY_TOL
    }

    fn center(&self) -> Point {
        DVector::from_element(self.n, 1.0 / self.n as f64)
    }

    fn has_coordinate_atoms(&self) -> bool {
        true
    }
}

/// Preimage `T⁻¹(D) = {y : T(y) ∈ D}` of a polytope under an invertible
/// affine map. Its atoms are `T⁻¹(atom_i)` in the same order.
#[derive(Debug, Clone)]
pub struct AffineImage {
    inner: Arc<dyn AtomicDomain>,
    map: AffineMap,
    atoms: Vec<Point>,
}

impl AffineImage {
    pub fn new(inner: Arc<dyn AtomicDomain>, map: AffineMap) -> Result<Self> {
        check_dim(inner.dim(), map.dim())?;
        let atoms = inner
            .atoms()
            .ok_or(Error::Unsupported("an inner domain with a finite atom list"))?
            .iter()
            .map(|a| map.invert(a))
            .collect();
        Ok(Self { inner, map, atoms })
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }
}

impl AtomicDomain for AffineImage {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn lmo(&self, g: &DVector<f64>) -> Result<Vertex> {
        check_dim(self.dim(), g.len())?;
        let j = argmin_first(self.atoms.iter().map(|a| g.dot(a)));
        Ok(Vertex { index: Some(j), point: self.atoms[j].clone() })
    }

    fn num_atoms(&self) -> Option<usize> {
        Some(self.atoms.len())
    }

    fn atom(&self, index: usize) -> Option<Point> {
        self.atoms.get(index).cloned()
    }

    fn contains(&self, y: &Point) -> bool {
        y.len() == self.dim() && self.inner.contains(&self.map.apply(y))
    }

    fn center(&self) -> Point {
        self.map.invert(&self.inner.center())
    }
}
