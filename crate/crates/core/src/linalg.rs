//! Dense vector/matrix aliases and the symmetric positive-definite metric type.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RescaleError, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Per-entry tolerance for the symmetry check in [`SpdMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric positive-definite matrix, the metric `H` of the BFGS family.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    /// Validates symmetry (entrywise, absolute 1e-12) and positive
    /// definiteness (Cholesky success).
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(RescaleError::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        let asym = max_asymmetry(&m);
        if asym > SYMMETRY_TOL {
            return Err(RescaleError::NotSymmetric(asym));
        }
        if m.clone().cholesky().is_none() {
            return Err(RescaleError::NotPositiveDefinite);
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by an update formula that preserves positive
    /// definiteness in exact arithmetic. Symmetrizes, never factors.
    pub(crate) fn from_update(mut m: Matrix) -> Self {
        symmetrize(&mut m);
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Result<Self> {
        Self::new(Matrix::identity(n, n) * scale)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        &self.0 * v
    }

    pub fn determinant(&self) -> f64 {
        // LU keeps precision for the tiny determinants of long runs
        self.0.clone().lu().determinant()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some()
    }

    /// `(lambda_min, lambda_max)`.
    pub fn eigen_extremes(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.0.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.0.clone().try_inverse().ok_or(RescaleError::Singular)
    }
}

pub fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(RescaleError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Cosine of the angle between two vectors, computed on normalized copies so
/// that very small vectors neither underflow nor lose precision.
pub fn cosine(a: &Vector, b: &Vector) -> f64 {
    match (unit(a), unit(b)) {
        (Some(ua), Some(ub)) => ua.dot(&ub),
        _ => 0.0,
    }
}

/// `v / |v|` with the norm taken after scaling by the largest entry.
fn unit(v: &Vector) -> Option<Vector> {
    let big = v.amax();
    if big == 0.0 || !big.is_finite() {
        return None;
    }
    let scaled = v / big;
    let norm = scaled.norm();
    Some(scaled / norm)
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Componentwise standard normal, then normalized.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    loop {
        let v = standard_normal_vector(n, rng);
        let norm = v.norm();
        if norm > 1e-300 {
            return v / norm;
        }
    }
}

/// `Q diag(10^u_i) Q^T` with `Q` the orthogonal factor of a Gaussian matrix
/// and `u_i` uniform on `[-spread, spread]`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, spread: f64, rng: &mut R) -> SpdMatrix {
    let q = standard_normal_matrix(n, n, rng).qr().q();
    let eigs = Vector::from_fn(n, |_, _| 10f64.powf(rng.random_range(-spread..=spread)));
    let m = &q * Matrix::from_diagonal(&eigs) * q.transpose();
    SpdMatrix::from_update(m)
}

/// Serde helper: vectors as plain JSON arrays.
pub mod vec_serde {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        Ok(Vector::from_vec(raw))
    }
}

/// Serde helper: matrices as arrays of rows.
pub mod mat_serde {
    use super::Matrix;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        s.collect_seq(rows)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(Matrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        mat_serde::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = mat_serde::deserialize(d)?;
        SpdMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SpdMatrix::new(asym), Err(RescaleError::NotSymmetric(_))));
        let indef = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdMatrix::new(indef), Err(RescaleError::NotPositiveDefinite)));
    }

    #[test]
    fn random_spd_is_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            let h = random_spd(n, 1.0, &mut rng);
            assert!(h.is_positive_definite());
            let (lo, hi) = h.eigen_extremes();
            assert!(lo >= 0.1 - 1e-9 && hi <= 10.0 + 1e-9);
        }
    }

    #[test]
    fn cosine_survives_tiny_vectors() {
        let a = Vector::from_vec(vec![1e-200, 0.0]);
        let b = Vector::from_vec(vec![-1e-200, 1e-200]);
        assert!((cosine(&a, &b) + 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }
}
