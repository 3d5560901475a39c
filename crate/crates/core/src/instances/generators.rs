//! Generators for the instance families.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{RescaleError, Result};
use crate::linalg::{
    random_spd, random_unit_vector, standard_normal_matrix, standard_normal_vector, Matrix,
    SpdMatrix, Vector,
};
use crate::oracles::{FiniteSetOracle, MaxQuadSubdiff, QuadraticPiece};

/// Dimension of the simplex family.
pub const SIMPLEX_DIM: usize = 5;

/// Vertices `a_j = 4^j e_j` of the simplex family, `j = 1..5`.
pub fn simplex_vertices() -> Vec<Vector> {
    (1..=SIMPLEX_DIM)
        .map(|j| {
            let mut a = Vector::zeros(SIMPLEX_DIM);
            a[j - 1] = 4f64.powi(j as i32);
            a
        })
        .collect()
}

/// Convex weights `w_j = 4^-j / sum_i 4^-i` with `sum_j w_j a_j = p`.
pub fn simplex_weights() -> Vec<f64> {
    let raw: Vec<f64> = (1..=SIMPLEX_DIM).map(|j| 4f64.powi(-(j as i32))).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// The point `p = (sum_j 4^-j)^-1 (1, ..., 1)`.
pub fn simplex_center() -> Vector {
    let total: f64 = (1..=SIMPLEX_DIM).map(|j| 4f64.powi(-(j as i32))).sum();
    Vector::from_element(SIMPLEX_DIM, 1.0 / total)
}

/// The six points `a_j - (1 + eps) p` and `-p` in `R^5`.
pub fn gen_simplex(eps: f64) -> Result<FiniteSetOracle> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(RescaleError::InvalidInstance(format!("eps must be > 0, got {eps}")));
    }
    let p = simplex_center();
    let mut points: Vec<Vector> = simplex_vertices()
        .into_iter()
        .map(|a| a - &p * (1.0 + eps))
        .collect();
    points.push(-p);
    FiniteSetOracle::new(points)
}

/// Ellipsoid separation data: the set is `A B - c`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidInstance {
    pub a: Matrix,
    pub c: Vector,
    /// Unit starting vector `x`, so the first `h` is `A x - c`.
    pub start: Vector,
}

/// `A = diag(10^e)`, `c = (1 + d) A u` for a random unit `u`, and a random
/// unit start. Both `u` and the start come from one ChaCha stream.
pub fn gen_ellipsoid(exponents: &[i32], d: f64, seed: u64) -> Result<EllipsoidInstance> {
    if exponents.is_empty() {
        return Err(RescaleError::InvalidInstance("no exponents".into()));
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(RescaleError::InvalidInstance(format!("d must be > 0, got {d}")));
    }
    let n = exponents.len();
    let diag = Vector::from_iterator(n, exponents.iter().map(|&e| 10f64.powi(e)));
    let a = Matrix::from_diagonal(&diag);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unit_vector(n, &mut rng);
    let c = (&a * u) * (1.0 + d);
    let start = random_unit_vector(n, &mut rng);
    Ok(EllipsoidInstance { a, c, start })
}

/// The two-dimensional example on which Shor updating cycles:
/// `A = diag(1, 10)`, `v = -(10, 39)`, `c = 1.01 A v / |v|`.
///
/// The start is `x = (-1, 0)`. Starts at angles between roughly 170 and 240
/// degrees fall into the period-five cycle; `x = v / |v|` (about 256
/// degrees) separates after nine iterations.
pub fn failure_instance() -> EllipsoidInstance {
    let a = Matrix::from_diagonal(&Vector::from_row_slice(&[1.0, 10.0]));
    let v = failure_direction();
    let c = (&a * &v) * (1.01 / v.norm());
    let start = Vector::from_row_slice(&[-1.0, 0.0]);
    EllipsoidInstance { a, c, start }
}

/// The vector `v = -(10, 39)` defining the offset of [`failure_instance`].
pub fn failure_direction() -> Vector {
    Vector::from_row_slice(&[-10.0, -39.0])
}

/// `m` pieces `1/2 x^T P x + b^T x + c` on `R^n` with `P = G^T G + I`,
/// `G`, `b`, `c` standard normal.
pub fn gen_max_quadratics(n: usize, m: usize, seed: u64) -> Result<MaxQuadSubdiff> {
    if n == 0 || m == 0 {
        return Err(RescaleError::InvalidInstance(format!("need n, m >= 1, got {n}, {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = (0..m)
        .map(|_| {
            let g = standard_normal_matrix(n, n, &mut rng);
            let p = g.tr_mul(&g) + Matrix::identity(n, n);
            let b = standard_normal_vector(n, &mut rng);
            let c = standard_normal_vector(1, &mut rng)[0];
            Ok(QuadraticPiece {
                p: SpdMatrix::new(p)?,
                b,
                c,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MaxQuadSubdiff::new(pieces)
}

/// A random start for the unit-ball iteration: unit `g0` and
/// `H0 = Q diag(10^u) Q^T`, `u` uniform on `[-1, 1]`.
pub fn gen_unit_ball_start(n: usize, seed: u64) -> Result<(Vector, SpdMatrix)> {
    if n == 0 {
        return Err(RescaleError::InvalidDimension(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g0 = random_unit_vector(n, &mut rng);
    let h0 = random_spd(n, 1.0, &mut rng);
    Ok((g0, h0))
}

/// A standard normal starting point. Drawn from stream 1 of the ChaCha
/// generator, so it is independent of the instance drawn from the same seed.
pub fn gen_start_point(n: usize, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    standard_normal_vector(n, &mut rng)
}

/// `R = U diag(sigma) W^T` with random orthogonal `U`, `W` and singular
/// values log-spaced from 1 down to `1 / sqrt(condition)`, so `R^T R` has
/// condition number `condition`.
pub fn gen_quadratic_factor(n: usize, condition: f64, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(RescaleError::InvalidDimension(n));
    }
    if !(condition >= 1.0) || !condition.is_finite() {
        return Err(RescaleError::InvalidInstance(format!(
            "condition number must be >= 1, got {condition}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = standard_normal_matrix(n, n, &mut rng).qr().q();
    let w = standard_normal_matrix(n, n, &mut rng).qr().q();
    let sigma = Vector::from_fn(n, |i, _| {
        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        condition.powf(-0.5 * t)
    });
    Ok(u * Matrix::from_diagonal(&sigma) * w.transpose())
}
