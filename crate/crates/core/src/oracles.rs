//! Linear-optimization oracles over compact sets.
//!
//! A [`SupportOracle`] answers `argmax { <q, d> : q in S }`. Every minimizer
//! query is expressed through it with the direction negated.

use serde::{Deserialize, Serialize};

use crate::error::{RescaleError, Result};
use crate::linalg::{check_dim, mat_serde, vec_serde, Matrix, SpdMatrix, Vector};
use crate::updates::RescalingTransform;

/// Smallest direction norm that norm-dependent oracles will normalize.
pub const DIRECTION_FLOOR: f64 = 1e-300;

/// Linear optimization over a compact set.
pub trait SupportOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn describe(&self) -> String;

    /// A maximizer of `<., direction>` over the set and the maximal value.
    fn argmax_linear(&self, direction: &Vector) -> Result<(Vector, f64)>;

    /// A minimizer of `<., h>` over the set and the minimal value.
    fn argmin_linear(&self, h: &Vector) -> Result<(Vector, f64)> {
        let (p, value) = self.argmax_linear(&-h)?;
        Ok((p, -value))
    }
}

impl<T: SupportOracle + ?Sized> SupportOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
    fn argmax_linear(&self, direction: &Vector) -> Result<(Vector, f64)> {
        (**self).argmax_linear(direction)
    }
}

/// Minimize `<., h>` over `V S` without forming the transformed set:
/// `min_{q in S} <V q, h> = min_{q in S} <q, V^T h>`, attained at `V q*`.
pub fn transformed_argmin<O: SupportOracle + ?Sized>(
    oracle: &O,
    transform: &RescalingTransform,
    h: &Vector,
) -> Result<(Vector, f64)> {
    check_dim(transform.dim(), h.len())?;
    let (q, _) = oracle.argmin_linear(&transform.apply_transpose(h))?;
    let p = transform.apply(&q);
    let value = p.dot(h);
    Ok((p, value))
}

/// A finite point set; ties resolve to the lowest index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSetOracle {
    #[serde(with = "points_serde")]
    points: Vec<Vector>,
}

mod points_serde {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(pts: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(pts.iter().map(|p| p.iter().copied().collect::<Vec<_>>()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        let raw = Vec::<Vec<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(Vector::from_vec).collect())
    }
}

impl FiniteSetOracle {
    pub fn new(points: Vec<Vector>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| RescaleError::InvalidInstance("empty point set".into()))?;
        let n = first.len();
        if n == 0 {
            return Err(RescaleError::InvalidInstance("zero-dimensional points".into()));
        }
        for p in &points {
            check_dim(n, p.len())?;
            if p.iter().any(|x| !x.is_finite()) {
                return Err(RescaleError::InvalidInstance("non-finite coordinate".into()));
            }
        }
        Ok(Self { points })
    }

    pub fn segment(c: Vector, d: Vector) -> Result<Self> {
        Self::new(vec![c, d])
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains_origin_point(&self) -> bool {
        self.points.iter().any(|p| p.iter().all(|&x| x == 0.0))
    }

    /// Index and value of the first point attaining `max <p, direction>`.
    pub fn argmax_index(&self, direction: &Vector) -> (usize, f64) {
        let mut best = (0, self.points[0].dot(direction));
        for (i, p) in self.points.iter().enumerate().skip(1) {
            let v = p.dot(direction);
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    /// `max_i <p_i, direction>`; a certificate `z` separates when this is < 0.
    pub fn max_inner(&self, direction: &Vector) -> f64 {
        self.argmax_index(direction).1
    }
}

impl SupportOracle for FiniteSetOracle {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn describe(&self) -> String {
        format!("finite set of {} points in R^{}", self.points.len(), self.dim())
    }

    fn argmax_linear(&self, direction: &Vector) -> Result<(Vector, f64)> {
        check_dim(self.dim(), direction.len())?;
        let (i, v) = self.argmax_index(direction);
        Ok((self.points[i].clone(), v))
    }

    fn argmin_linear(&self, h: &Vector) -> Result<(Vector, f64)> {
        check_dim(self.dim(), h.len())?;
        // lowest index among minimizers, not among maximizers of -h
        let mut best = (0, self.points[0].dot(h));
        for (i, p) in self.points.iter().enumerate().skip(1) {
            let v = p.dot(h);
            if v < best.1 {
                best = (i, v);
            }
        }
        Ok((self.points[best.0].clone(), best.1))
    }
}

/// The boundary of the ellipsoid `A B - c`, `B` the closed unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidOracle {
    #[serde(with = "mat_serde")]
    a: Matrix,
    #[serde(with = "vec_serde")]
    c: Vector,
}

impl EllipsoidOracle {
    pub fn new(a: Matrix, c: Vector) -> Result<Self> {
        if !a.is_square() {
            return Err(RescaleError::DimensionMismatch {
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        check_dim(a.nrows(), c.len())?;
        if a.clone().lu().try_inverse().is_none() {
            return Err(RescaleError::Singular);
        }
        Ok(Self { a, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn c(&self) -> &Vector {
        &self.c
    }

    /// Does `z` certify `c` outside `A B`: `|A^T z| < c^T z`?
    pub fn certifies(&self, z: &Vector) -> bool {
        self.a.tr_mul(z).norm() < self.c.dot(z)
    }
}

impl SupportOracle for EllipsoidOracle {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn describe(&self) -> String {
        format!("ellipsoid boundary A B - c in R^{}", self.dim())
    }

    fn argmax_linear(&self, direction: &Vector) -> Result<(Vector, f64)> {
        check_dim(self.dim(), direction.len())?;
        let dn = direction.norm();
        if !(dn > DIRECTION_FLOOR) {
            return Err(RescaleError::ZeroDirection(dn));
        }
        let aty = self.a.tr_mul(direction);
        let norm = aty.norm();
        if !(norm > DIRECTION_FLOOR) {
            return Err(RescaleError::ZeroDirection(norm));
        }
        let y = aty / norm;
        let point = &self.a * y - &self.c;
        let value = point.dot(direction);
        Ok((point, value))
    }
}

/// A closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallOracle {
    #[serde(with = "vec_serde")]
    center: Vector,
    radius: f64,
}

impl BallOracle {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(RescaleError::InvalidInstance(format!("ball radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(n: usize) -> Self {
        Self {
            center: Vector::zeros(n),
            radius: 1.0,
        }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }
}

impl SupportOracle for BallOracle {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn describe(&self) -> String {
        format!("ball of radius {} in R^{}", self.radius, self.dim())
    }

    fn argmax_linear(&self, direction: &Vector) -> Result<(Vector, f64)> {
        check_dim(self.dim(), direction.len())?;
        let norm = direction.norm();
        if !(norm > DIRECTION_FLOOR) {
            return Err(RescaleError::ZeroDirection(norm));
        }
        let point = &self.center + direction * (self.radius / norm);
        let value = point.dot(direction);
        Ok((point, value))
    }
}

/// One strictly convex piece `1/2 x^T P x + b^T x + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPiece {
    pub p: SpdMatrix,
    #[serde(with = "vec_serde")]
    pub b: Vector,
    pub c: f64,
}

impl QuadraticPiece {
    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&self.p.mul_vec(x)) + self.b.dot(x) + self.c
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        self.p.mul_vec(x) + &self.b
    }
}

/// Default relative activity tolerance for [`MaxQuadSubdiff`].
pub const DEFAULT_ACTIVITY_TOL: f64 = 1e-10;

/// `f(x) = max_i q_i(x)` over strictly convex quadratics, with its
/// subdifferential `conv { grad q_i(x) : i active }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxQuadSubdiff {
    pieces: Vec<QuadraticPiece>,
    activity_tol: f64,
}

impl MaxQuadSubdiff {
    pub fn new(pieces: Vec<QuadraticPiece>) -> Result<Self> {
        Self::with_activity_tol(pieces, DEFAULT_ACTIVITY_TOL)
    }

    pub fn with_activity_tol(pieces: Vec<QuadraticPiece>, activity_tol: f64) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| RescaleError::InvalidInstance("no quadratic pieces".into()))?;
        let n = first.b.len();
        for piece in &pieces {
            check_dim(n, piece.p.dim())?;
            check_dim(n, piece.b.len())?;
        }
        if !(activity_tol >= 0.0) {
            return Err(RescaleError::InvalidConfig(format!(
                "activity tolerance {activity_tol}"
            )));
        }
        Ok(Self {
            pieces,
            activity_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].b.len()
    }

    pub fn pieces(&self) -> &[QuadraticPiece] {
        &self.pieces
    }

    pub fn activity_tol(&self) -> f64 {
        self.activity_tol
    }

    pub fn piece_values(&self, x: &Vector) -> Vec<f64> {
        self.pieces.iter().map(|q| q.value(x)).collect()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.piece_values(x)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices whose value is within the relative activity band of the max.
    pub fn active_set(&self, x: &Vector) -> Vec<usize> {
        let values = self.piece_values(x);
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let band = self.activity_tol * (1.0 + top.abs());
        values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= top - band)
            .map(|(i, _)| i)
            .collect()
    }

    /// The active gradient maximizing `<grad q_i(x), s>`; lowest index on ties.
    pub fn subdiff_argmax(&self, x: &Vector, s: &Vector) -> Vector {
        let mut best: Option<(Vector, f64)> = None;
        for i in self.active_set(x) {
            let grad = self.pieces[i].gradient(x);
            let v = grad.dot(s);
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((grad, v));
            }
        }
        best.expect("active set is never empty").0
    }

    /// The subdifferential at `x` viewed as a compact set.
    pub fn subdifferential_at(&self, x: Vector) -> SubdifferentialOracle<'_> {
        SubdifferentialOracle { f: self, x }
    }
}

/// `∂f(x)` of a max-of-quadratics, frozen at a point.
#[derive(Debug, Clone)]
pub struct SubdifferentialOracle<'a> {
    f: &'a MaxQuadSubdiff,
    x: Vector,
}

impl SupportOracle for SubdifferentialOracle<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn describe(&self) -> String {
        format!("subdifferential of a max of {} quadratics", self.f.pieces.len())
    }

    fn argmax_linear(&self, direction: &Vector) -> Result<(Vector, f64)> {
        check_dim(self.dim(), direction.len())?;
        let g = self.f.subdiff_argmax(&self.x, direction);
        let value = g.dot(direction);
        Ok((g, value))
    }
}
