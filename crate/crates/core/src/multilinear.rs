//! Symmetric multilinear forms and the bound
//! `sup_{u,v∈S} |A[u]^p[v]| ≤ C_p · sup_{h∈S} |A[h]^{p+1}|`
//! for a convex set `S`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Largest dimension stored densely.
pub const MAX_DENSE_DIM: usize = 32;

const SYMMETRY_TOL: f64 = 1e-12;

type Evaluator = Arc<dyn Fn(&[&Point]) -> f64 + Send + Sync>;

/// Symmetric `(p+1)`-linear form `A[h_1, …, h_{p+1}]`.
#[derive(Clone)]
pub enum SymmetricForm {
    /// Order 2, `A[u, v] = ⟨Mu, v⟩`.
    Matrix(DMatrix<f64>),
    /// Order 3, dense `n³` entries in row-major `(i, j, k)` order.
    Tensor3 { dim: usize, data: Vec<f64> },
    /// Any order, supplied as a callback assumed symmetric.
    Evaluator { order: usize, dim: usize, eval: Evaluator },
}

impl fmt::Debug for SymmetricForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Matrix(m) => f.debug_tuple("Matrix").field(m).finish(),
            Self::Tensor3 { dim, .. } => f.debug_struct("Tensor3").field("dim", dim).finish_non_exhaustive(),
            Self::Evaluator { order, dim, .. } => {
                f.debug_struct("Evaluator").field("order", order).field("dim", dim).finish_non_exhaustive()
            }
        }
    }
}

fn check_dense_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DENSE_DIM {
        return Err(Error::InvalidParameter(format!("dense forms need 1 ≤ n ≤ {MAX_DENSE_DIM}, got {n}")));
    }
    Ok(())
}

impl SymmetricForm {
    pub fn matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        check_dense_dim(m.nrows())?;
        if (&m - m.transpose()).amax() > SYMMETRY_TOL * m.amax().max(1.0) {
            return Err(Error::InvalidParameter("matrix is not symmetric".into()));
        }
        Ok(Self::Matrix(m))
    }

    /// Order-3 form from already symmetric entries.
    pub fn tensor3(dim: usize, data: Vec<f64>) -> Result<Self> {
        check_dense_dim(dim)?;
        if data.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim * dim, got: data.len() });
        }
        let scale = data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let at = |i: usize, j: usize, k: usize| data[(i * dim + j) * dim + k];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let v = at(i, j, k);
                    if [at(i, k, j), at(j, i, k), at(j, k, i), at(k, i, j), at(k, j, i)]
                        .iter()
                        .any(|w| (w - v).abs() > SYMMETRY_TOL * scale)
                    {
                        return Err(Error::InvalidParameter("3-tensor is not symmetric".into()));
                    }
                }
            }
        }
        Ok(Self::Tensor3 { dim, data })
    }

    /// Order-3 form from arbitrary entries, averaged over the six index
    /// permutations.
    pub fn tensor3_symmetrized(dim: usize, raw: &[f64]) -> Result<Self> {
        check_dense_dim(dim)?;
        if raw.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim * dim, got: raw.len() });
        }
        let at = |i: usize, j: usize, k: usize| raw[(i * dim + j) * dim + k];
        let mut data = vec![0.0; raw.len()];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    data[(i * dim + j) * dim + k] =
                        (at(i, j, k) + at(i, k, j) + at(j, i, k) + at(j, k, i) + at(k, i, j) + at(k, j, i)) / 6.0;
                }
            }
        }
        Ok(Self::Tensor3 { dim, data })
    }

    pub fn evaluator<F>(order: usize, dim: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[&Point]) -> f64 + Send + Sync + 'static,
    {
        if order < 2 {
            return Err(Error::InvalidParameter(format!("form order must be at least 2, got {order}")));
        }
        Ok(Self::Evaluator { order, dim, eval: Arc::new(eval) })
    }

    /// `p + 1`.
    pub fn order(&self) -> usize {
        match self {
            Self::Matrix(_) => 2,
            Self::Tensor3 { .. } => 3,
            Self::Evaluator { order, .. } => *order,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Matrix(m) => m.nrows(),
            Self::Tensor3 { dim, .. } | Self::Evaluator { dim, .. } => *dim,
        }
    }

    /// `A[h_1, …, h_{p+1}]`.
    pub fn eval(&self, args: &[&Point]) -> Result<f64> {
        if args.len() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), got: args.len() });
        }
        if let Some(a) = args.iter().find(|a| a.len() != self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: a.len() });
        }
        Ok(match self {
            Self::Matrix(m) => (m * args[0]).dot(args[1]),
            Self::Tensor3 { dim, data } => {
                let n = *dim;
                let (x, y, z) = (args[0], args[1], args[2]);
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let row = &data[(i * n + j) * n..(i * n + j + 1) * n];
                        let inner: f64 = row.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
                        s += x[i] * y[j] * inner;
                    }
                }
                s
            }
            Self::Evaluator { eval, .. } => eval(args),
        })
    }

    /// `A[h]^{p+1}`.
    pub fn diagonal(&self, h: &Point) -> Result<f64> {
        self.eval(&vec![h; self.order()])
    }

    /// `A[u]^p[v]`.
    pub fn mixed(&self, u: &Point, v: &Point) -> Result<f64> {
        let mut args = vec![u; self.order() - 1];
        args.push(v);
        self.eval(&args)
    }
}

/// `C_p = ((p+1)^{p+1} + p^{p+1} + 1)/(p+1)!` as a reduced fraction.
pub fn c_p_fraction(p: u32) -> Result<(u128, u128)> {
    if p == 0 || p > 20 {
        return Err(Error::InvalidParameter(format!("C_p is computed for 1 ≤ p ≤ 20, got {p}")));
    }
    let q = u128::from(p);
    let num = (q + 1).pow(p + 1) + q.pow(p + 1) + 1;
    let den: u128 = (1..=q + 1).product();
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn c_p(p: u32) -> Result<f64> {
    let (n, d) = c_p_fraction(p)?;
    Ok(n as f64 / d as f64)
}

/// Finite witness for one pair `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationCertificate {
    /// `|A[u]^p[v]|`.
    pub lhs: f64,
    /// `u, v, h_1, …, h_p` with `h_i = α_i u + (1 − α_i) v`, `α_i = i/(i+1)`.
    pub points: Vec<Point>,
    /// `C_p · max |A[h]^{p+1}|` over `points`.
    pub bound: f64,
}

impl VariationCertificate {
    /// `lhs ≤ bound` up to a relative tolerance of `1e-8`.
    pub fn holds(&self) -> bool {
        self.lhs <= self.bound + 1e-8 * self.bound.abs().max(self.lhs.abs()).max(1e-300)
    }
}

pub fn variation_certificate(form: &SymmetricForm, u: &Point, v: &Point) -> Result<VariationCertificate> {
    let p = form.order() - 1;
    let lhs = form.mixed(u, v)?.abs();
    let mut points = vec![u.clone(), v.clone()];
    for i in 1..=p {
        let alpha = i as f64 / (i as f64 + 1.0);
        points.push(u * alpha + v * (1.0 - alpha));
    }
    let mut sup = 0.0f64;
    for h in &points {
        sup = sup.max(form.diagonal(h)?.abs());
    }
    Ok(VariationCertificate { lhs, points, bound: c_p(p as u32)? * sup })
}

/// Suprema of the form `A[u, v] = u⁽¹⁾v⁽¹⁾ − 2u⁽²⁾v⁽²⁾` over the segment
/// `S = {x⁽¹⁾ = 1, x⁽²⁾ ∈ [−1, 1]}`, which shows `C_1 = 3` is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    /// `sup_{u,v∈S} |A[u, v]|`.
    pub pair_sup: f64,
    /// `sup_{h∈S} |A[h, h]|`.
    pub diagonal_sup: f64,
}

pub fn tightness_form() -> SymmetricForm {
    SymmetricForm::Matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]))
}

/// Evaluates both suprema on the grid `x⁽²⁾ = (2i − N)/N`, `i = 0..=N`,
/// which contains the maximizers `±1` and `0` exactly.
pub fn tightness_example(grid: usize) -> Result<TightnessReport> {
    if grid < 2 || !grid.is_multiple_of(2) {
        return Err(Error::InvalidParameter("tightness grid must be an even number ≥ 2".into()));
    }
    let a = tightness_form();
    let n = grid as f64;
    let pts: Vec<Point> =
        (0..=grid).map(|i| Point::from_vec(vec![1.0, (2.0 * i as f64 - n) / n])).collect();
    let mut pair_sup = 0.0f64;
    let mut diagonal_sup = 0.0f64;
    for u in &pts {
        diagonal_sup = diagonal_sup.max(a.diagonal(u)?.abs());
        for v in &pts {
            pair_sup = pair_sup.max(a.eval(&[u, v])?.abs());
        }
    }
    Ok(TightnessReport { pair_sup, diagonal_sup })
}

/// Smallest eigenvalue tolerated as PSD.
pub const PSD_TOL: f64 = -1e-10;

/// For a PSD order-2 form over a finite set `S`: `(max_{u,v} |A[u, v]|,
/// max_h A[h, h])`. The two agree.
pub fn psd_equality_check(form: &SymmetricForm, set: &[Point]) -> Result<(f64, f64)> {
    let SymmetricForm::Matrix(m) = form else {
        return Err(Error::Unsupported("a PSD check on a form without an explicit matrix"));
    };
    let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min < PSD_TOL {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    let mut lhs = 0.0f64;
    let mut rhs = 0.0f64;
    for u in set {
        rhs = rhs.max(form.eval(&[u, u])?);
        for v in set {
            lhs = lhs.max(form.eval(&[u, v])?.abs());
        }
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, n: usize) -> SymmetricForm {
        let raw: Vec<f64> = (0..n * n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymmetricForm::tensor3_symmetrized(n, &raw).unwrap()
    }

    fn random_simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Point {
        let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = w.iter().sum();
        DVector::from_iterator(n, w.iter().map(|x| x / s))
    }

    #[test]
    fn c_p_values() {
        assert_eq!(c_p(1).unwrap(), 3.0);
        assert_eq!(c_p(2).unwrap(), 6.0);
        assert_eq!(c_p_fraction(3).unwrap(), (169, 12));
        assert!((c_p(3).unwrap() - 338.0 / 24.0).abs() < 1e-15);
        assert!(c_p(0).is_err());
    }

    #[test]
    fn c_p_below_stated_bound() {
        for p in 1..=6u32 {
            let fact: f64 = (1..=p).map(f64::from).product();
            assert!(c_p(p).unwrap() <= 2.0 * f64::from(p + 1).powi(p as i32) / fact);
        }
    }

    #[test]
    fn tensor_permutation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_tensor(&mut rng, 4);
        for _ in 0..20 {
            let x = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let z = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let base = a.eval(&[&x, &y, &z]).unwrap();
            for perm in [[&y, &x, &z], [&z, &y, &x], [&x, &z, &y], [&y, &z, &x], [&z, &x, &y]] {
                assert!((a.eval(&perm).unwrap() - base).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn asymmetric_inputs_rejected() {
        assert!(SymmetricForm::matrix(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).is_err());
        let mut data = vec![0.0; 8];
        data[1] = 1.0;
        assert!(SymmetricForm::tensor3(2, data).is_err());
        assert!(SymmetricForm::matrix(DMatrix::identity(33, 33)).is_err());
    }

    #[test]
    fn equal_points_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_tensor(&mut rng, 3);
        let u = random_simplex_point(&mut rng, 3);
        let c = variation_certificate(&a, &u, &u).unwrap();
        assert_eq!(c.points.len(), 4);
        assert!(c.holds());
        assert!((c.lhs - a.diagonal(&u).unwrap().abs()).abs() < 1e-15);
    }

    #[test]
    fn tightness_values() {
        let r = tightness_example(200).unwrap();
        assert_eq!(r.pair_sup, 3.0);
        assert_eq!(r.diagonal_sup, 1.0);
        assert_eq!(r.pair_sup, c_p(1).unwrap() * r.diagonal_sup);
    }

    #[test]
    fn psd_examples() {
        let vertices: Vec<Point> = (0..3)
            .map(|i| {
                let mut e = DVector::zeros(3);
                e[i] = 1.0;
                e
            })
            .collect();
        assert_eq!(psd_equality_check(&SymmetricForm::Matrix(DMatrix::identity(3, 3)), &vertices).unwrap(), (1.0, 1.0));
        assert_eq!(psd_equality_check(&SymmetricForm::Matrix(DMatrix::zeros(3, 3)), &vertices).unwrap(), (0.0, 0.0));

        let a = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set: Vec<Point> = (0..10).map(|_| random_simplex_point(&mut rng, 3)).collect();
        let (lhs, rhs) = psd_equality_check(&SymmetricForm::Matrix(&a * a.transpose()), &set).unwrap();
        let best = set.iter().map(|h| a.dot(h).powi(2)).fold(0.0, f64::max);
        assert!((lhs - best).abs() < 1e-12 && (rhs - best).abs() < 1e-12);

        let bad = SymmetricForm::Matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert!(matches!(psd_equality_check(&bad, &vertices[..2]), Err(Error::NotPositiveSemidefinite(_))));
    }

    /// With `A[u]³ = A[v]³ = 0` and `A[u,u,v] = 129`, `A[u,v,v] = −177`, the
    /// two interior points give `|A[h]³| = 18`, so the finite set certifies
    /// only `6·18 = 108 < 129`. The bound on the whole segment still holds.
    #[test]
    fn degenerate_cubic_form_exceeds_finite_certificate() {
        let (b, c) = (129.0, -177.0);
        let mut data = vec![0.0; 8];
        for (idx, val) in [((0, 0, 1), b), ((0, 1, 0), b), ((1, 0, 0), b), ((0, 1, 1), c), ((1, 0, 1), c), ((1, 1, 0), c)] {
            data[(idx.0 * 2 + idx.1) * 2 + idx.2] = val;
        }
        let a = SymmetricForm::tensor3(2, data).unwrap();
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let cert = variation_certificate(&a, &u, &v).unwrap();
        assert_eq!(cert.lhs, 129.0);
        assert!((cert.bound - 108.0).abs() < 1e-9);
        assert!(!cert.holds());

        let segment_sup = (0..=10_000)
            .map(|i| {
                let t = i as f64 / 10_000.0;
                a.diagonal(&(&u * t + &v * (1.0 - t))).unwrap().abs()
            })
            .fold(0.0, f64::max);
        assert!(cert.lhs <= c_p(2).unwrap() * segment_sup);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn quadratic_certificate_holds(seed in any::<u64>(), n in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = SymmetricForm::matrix((&raw + raw.transpose()) * 0.5).unwrap();
            let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            prop_assert!(variation_certificate(&a, &u, &v).unwrap().holds());
        }

        #[test]
        fn psd_cauchy_schwarz(seed in any::<u64>(), n in 1usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = SymmetricForm::Matrix(b.transpose() * b);
            let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let (uu, vv, uv) = (a.eval(&[&u, &u]).unwrap(), a.eval(&[&v, &v]).unwrap(), a.eval(&[&u, &v]).unwrap());
            prop_assert!(uv.abs() <= (uu * vv).sqrt() + 1e-10);
            prop_assert!((uu * vv).sqrt() <= uu.max(vv) + 1e-10);
        }
    }
}
