//! Rank-one rescaling kernels.
//!
//! Every function here is pure: inputs are borrowed, results are fresh values.
//! The BFGS family works on the inverse-Hessian approximation `H` (or its
//! factor `T` with `H = T^T T`), the Shor family on an accumulated transform
//! `V`.

use serde::{Deserialize, Serialize};

use crate::error::{RescaleError, Result};
use crate::linalg::{check_dim, Matrix, SpdMatrix, Vector};

/// Smallest direction norm accepted by [`shor_dilation`] and friends.
pub const DEFAULT_DIRECTION_FLOOR: f64 = 1e-14;
/// Relative curvature floor: `s^T y <= CURVATURE_FLOOR * |s| |y|` is rejected.
pub const CURVATURE_FLOOR: f64 = 1e-14;
/// Absolute floor for the scalar `beta = h^T (h - p)` of the factored W.
pub const BETA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    Identity,
    ShorDilation,
    BfgsFactor,
}

/// An invertible linear map accumulated from rank-one perturbations of the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RescalingTransform {
    matrix: Matrix,
    kind: TransformKind,
}

impl RescalingTransform {
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: Matrix::identity(n, n),
            kind: TransformKind::Identity,
        }
    }

    /// Wraps an arbitrary matrix as a factor transform; fails if singular.
    pub fn from_matrix(matrix: Matrix, kind: TransformKind) -> Result<Self> {
        if !matrix.is_square() {
            return Err(RescaleError::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let det = matrix.clone().lu().determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(RescaleError::Singular);
        }
        Ok(Self { matrix, kind })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.matrix * v
    }

    pub fn apply_transpose(&self, v: &Vector) -> Vector {
        self.matrix.tr_mul(v)
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.clone().lu().determinant()
    }

    /// `W * self`, i.e. the transform "apply self, then W".
    pub fn then(&self, w: &RescalingTransform) -> RescalingTransform {
        let kind = match (self.kind, w.kind) {
            (TransformKind::Identity, k) => k,
            (k, TransformKind::Identity) => k,
            (a, b) if a == b => a,
            _ => TransformKind::BfgsFactor,
        };
        RescalingTransform {
            matrix: &w.matrix * &self.matrix,
            kind,
        }
    }

    /// Divides by the Frobenius norm and returns that norm.
    pub fn normalize(&mut self) -> f64 {
        let scale = self.matrix.norm();
        if scale > 0.0 && scale.is_finite() {
            self.matrix /= scale;
        }
        scale
    }

    /// `T^T T`, the metric represented by a factor.
    pub fn gram(&self) -> SpdMatrix {
        SpdMatrix::from_update(self.matrix.tr_mul(&self.matrix))
    }
}

/// The quantities entering one BFGS update: `s = -H g` and `y = g_+ - g`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateInputs {
    pub g: Vector,
    pub g_plus: Vector,
    pub s: Vector,
    pub y: Vector,
}

impl UpdateInputs {
    pub fn new(h: &SpdMatrix, g: &Vector, g_plus: &Vector) -> Result<Self> {
        check_dim(h.dim(), g.len())?;
        check_dim(h.dim(), g_plus.len())?;
        let s = -h.mul_vec(g);
        let y = g_plus - g;
        Ok(Self {
            g: g.clone(),
            g_plus: g_plus.clone(),
            s,
            y,
        })
    }

    pub fn curvature(&self) -> f64 {
        self.s.dot(&self.y)
    }

    /// `s^T g`, negative whenever `H` is positive definite and `g != 0`.
    pub fn descent(&self) -> f64 {
        self.s.dot(&self.g)
    }
}

/// Shor's space dilation `W = I - e e^T / (beta |e|^2)`.
pub fn shor_dilation(e: &Vector, beta: f64) -> Result<RescalingTransform> {
    shor_dilation_with_floor(e, beta, DEFAULT_DIRECTION_FLOOR)
}

pub fn shor_dilation_with_floor(e: &Vector, beta: f64, floor: f64) -> Result<RescalingTransform> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(RescaleError::InvalidDilation(beta));
    }
    let norm = e.norm();
    if !(norm > floor) {
        return Err(RescaleError::DegenerateDirection { norm, floor });
    }
    let u = e / norm;
    let n = e.len();
    let matrix = Matrix::identity(n, n) - (&u * u.transpose()) / beta;
    Ok(RescalingTransform {
        matrix,
        kind: TransformKind::ShorDilation,
    })
}

fn check_curvature(s: &Vector, y: &Vector) -> Result<f64> {
    let sty = s.dot(y);
    if !(sty > CURVATURE_FLOOR * s.norm() * y.norm()) || !sty.is_finite() {
        return Err(RescaleError::CurvatureViolation { curvature: sty });
    }
    Ok(sty)
}

/// Unit-step BFGS update of the inverse-Hessian approximation:
/// `s = -H g`, `y = g_+ - g`, `H_+ = V H V^T + s s^T / s^T y` with
/// `V = I - s y^T / s^T y`.
pub fn bfgs_update(h: &SpdMatrix, g: &Vector, g_plus: &Vector) -> Result<SpdMatrix> {
    let inputs = UpdateInputs::new(h, g, g_plus)?;
    bfgs_update_with_step(h, &inputs.s, &inputs.y)
}

/// The same update driven by an explicit step `s` and gradient change `y`.
///
/// Expanded as a rank-two correction so a step costs O(n^2); the result is
/// re-symmetrized.
pub fn bfgs_update_with_step(h: &SpdMatrix, s: &Vector, y: &Vector) -> Result<SpdMatrix> {
    check_dim(h.dim(), s.len())?;
    check_dim(h.dim(), y.len())?;
    let sty = check_curvature(s, y)?;
    let hy = h.mul_vec(y);
    let yhy = y.dot(&hy);
    let mut next = h.matrix().clone();
    next.ger(-1.0 / sty, s, &hy, 1.0);
    next.ger(-1.0 / sty, &hy, s, 1.0);
    next.ger((1.0 + yhy / sty) / sty, s, s, 1.0);
    Ok(SpdMatrix::from_update(next))
}

/// The textbook form `V H V^T + s s^T / s^T y`, assembled with explicit
/// matrix products. Slower than [`bfgs_update_with_step`]; kept as a second
/// algebraic route for cross-checks.
pub fn bfgs_update_explicit(h: &SpdMatrix, s: &Vector, y: &Vector) -> Result<SpdMatrix> {
    let sty = check_curvature(s, y)?;
    let n = h.dim();
    let v = Matrix::identity(n, n) - (s * y.transpose()) / sty;
    let next = &v * h.matrix() * v.transpose() + (s * s.transpose()) / sty;
    Ok(SpdMatrix::from_update(next))
}

/// Factored BFGS update `T_+ = T (I - q s^T)` with
/// `q = y / s^T y + g / sqrt(-s^T g * s^T y)`, so that `T_+^T T_+` is the
/// [`bfgs_update`] of `T^T T`.
pub fn bfgs_update_factored(
    t: &RescalingTransform,
    g: &Vector,
    g_plus: &Vector,
) -> Result<RescalingTransform> {
    check_dim(t.dim(), g.len())?;
    check_dim(t.dim(), g_plus.len())?;
    let s = -t.matrix.tr_mul(&(&t.matrix * g));
    let y = g_plus - g;
    let sty = check_curvature(&s, &y)?;
    let stg = s.dot(g);
    if !(stg < 0.0) {
        return Err(RescaleError::NonDescentDirection(stg));
    }
    let q = &y / sty + g / (-stg * sty).sqrt();
    let tq = &t.matrix * q;
    let mut matrix = t.matrix.clone();
    matrix.ger(-1.0, &tq, &s, 1.0);
    Ok(RescalingTransform {
        matrix,
        kind: TransformKind::BfgsFactor,
    })
}

/// The non-symmetric rank-one transform of the Cholesky-factored BFGS
/// separators: `e = h - p`, `beta = h^T e`,
/// `W = I - e h^T / beta + h h^T / (|h| sqrt(beta))`.
pub fn bfgs_w_matrix(h: &Vector, p: &Vector) -> Result<RescalingTransform> {
    check_dim(h.len(), p.len())?;
    let hn = h.norm();
    if !(hn > DEFAULT_DIRECTION_FLOOR) {
        return Err(RescaleError::DegenerateDirection {
            norm: hn,
            floor: DEFAULT_DIRECTION_FLOOR,
        });
    }
    let e = h - p;
    let beta = h.dot(&e);
    if !(beta > BETA_FLOOR) {
        return Err(RescaleError::DegenerateCurvature(beta));
    }
    let n = h.len();
    let coeff = &e / beta - h / (hn * beta.sqrt());
    let matrix = Matrix::identity(n, n) - coeff * h.transpose();
    Ok(RescalingTransform {
        matrix,
        kind: TransformKind::BfgsFactor,
    })
}

/// Result of one central-cut ellipsoid step.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidStep {
    pub increment: Vector,
    pub h_plus: SpdMatrix,
}

/// One ellipsoid step with cut `g`: `s = -H g`,
/// increment `s / ((n+1) sqrt(-s^T g))`,
/// `H_+ = n^2/(n^2-1) (H + 2 s s^T / ((n+1) s^T g))`.
pub fn ellipsoid_update(h: &SpdMatrix, g: &Vector) -> Result<EllipsoidStep> {
    let n = h.dim();
    check_dim(n, g.len())?;
    if n < 2 {
        return Err(RescaleError::InvalidDimension(n));
    }
    let gn = g.norm();
    if !(gn > DEFAULT_DIRECTION_FLOOR) {
        return Err(RescaleError::DegenerateGradient(gn));
    }
    let nf = n as f64;
    let s = -h.mul_vec(g);
    let stg = s.dot(g);
    if !(stg < 0.0) {
        return Err(RescaleError::NonDescentDirection(stg));
    }
    let increment = &s / ((nf + 1.0) * (-stg).sqrt());
    let mut next = h.matrix().clone();
    next.ger(2.0 / ((nf + 1.0) * stg), &s, &s, 1.0);
    next *= nf * nf / (nf * nf - 1.0);
    Ok(EllipsoidStep {
        increment,
        h_plus: SpdMatrix::from_update(next),
    })
}

/// `P X P` with `P = I - z z^T` for a unit vector `z`.
pub fn project_out(x: &Matrix, z: &Vector) -> Matrix {
    let n = x.nrows();
    let p = Matrix::identity(n, n) - z * z.transpose();
    &p * x * &p
}

/// `(I - z z^T) H (I - z z^T) + z z^T`: the unit-step BFGS update of
/// `1/2 |x|^2` with `z = s / |s|`.
pub fn norm_one_update(h: &Matrix, z: &Vector) -> Matrix {
    project_out(h, z) + z * z.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_spd, standard_normal_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn dilation_along_axis() {
        let w = shor_dilation(&v(&[1.0, 0.0, 0.0]), 2.0).unwrap();
        let expected = Matrix::from_diagonal(&v(&[0.5, 1.0, 1.0]));
        assert!((w.matrix() - expected).norm() < 1e-15);
        assert_eq!(w.kind(), TransformKind::ShorDilation);
    }

    #[test]
    fn dilation_symmetric_case() {
        let e = v(&[1.0, 1.0]) / 2f64.sqrt();
        let w = shor_dilation(&e, 2.0).unwrap();
        assert!((w.apply(&v(&[1.0, 1.0])) - v(&[0.5, 0.5])).norm() < 1e-15);
        assert!((w.apply(&v(&[1.0, -1.0])) - v(&[1.0, -1.0])).norm() < 1e-15);
    }

    #[test]
    fn dilation_determinant_matches_assembled_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = standard_normal_vector(5, &mut rng);
        let w = shor_dilation(&e, 2.0).unwrap();
        // independent assembly: I - e e^T / (2 e^T e)
        let assembled = Matrix::identity(5, 5) - (&e * e.transpose()) / (2.0 * e.dot(&e));
        assert!((assembled.determinant() - 0.5).abs() < 1e-12);
        assert!((w.determinant() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dilation_rejects_bad_inputs() {
        assert!(matches!(
            shor_dilation(&v(&[0.0, 1e-16]), 2.0),
            Err(RescaleError::DegenerateDirection { .. })
        ));
        assert!(matches!(
            shor_dilation(&v(&[1.0, 0.0]), 1.0),
            Err(RescaleError::InvalidDilation(_))
        ));
        assert!(matches!(
            shor_dilation(&v(&[1.0, 0.0]), f64::NAN),
            Err(RescaleError::InvalidDilation(_))
        ));
    }

    #[test]
    fn scalar_bfgs_by_hand() {
        let h = SpdMatrix::scaled_identity(1, 2.0).unwrap();
        let h_plus = bfgs_update(&h, &v(&[1.0]), &v(&[-0.5])).unwrap();
        assert!((h_plus.matrix()[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
        // secant: (4/3)(-3/2) = -2 = s
        assert!((h_plus.matrix()[(0, 0)] * -1.5 + 2.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_secant() {
        let h = SpdMatrix::identity(3);
        let g = v(&[0.0, 0.6, 0.8]);
        let g_plus = -&g;
        let h_plus = bfgs_update(&h, &g, &g_plus).unwrap();
        let y = &g_plus - &g;
        let s = -&g;
        assert!((h_plus.mul_vec(&y) - s).norm() < 1e-15);
    }

    #[test]
    fn curvature_violation_is_reported() {
        let h = SpdMatrix::identity(2);
        let g = v(&[1.0, 0.0]);
        // y = 0
        assert!(matches!(
            bfgs_update(&h, &g, &g),
            Err(RescaleError::CurvatureViolation { .. })
        ));
        // s^T y < 0
        assert!(matches!(
            bfgs_update(&h, &g, &v(&[2.0, 0.0])),
            Err(RescaleError::CurvatureViolation { .. })
        ));
    }

    #[test]
    fn rank_two_form_matches_explicit_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..7 {
            let h = random_spd(n, 1.0, &mut rng);
            let s = standard_normal_vector(n, &mut rng);
            let mut y = standard_normal_vector(n, &mut rng);
            if s.dot(&y) <= 0.0 {
                y = -y;
            }
            let a = bfgs_update_with_step(&h, &s, &y).unwrap();
            let b = bfgs_update_explicit(&h, &s, &y).unwrap();
            let scale = b.matrix().norm();
            assert!((a.matrix() - b.matrix()).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn factored_scalar_case() {
        // H = T^2 = 2 reproduces the scalar example: T_+ = 2/sqrt(3)
        let t = RescalingTransform::from_matrix(
            Matrix::from_element(1, 1, 2f64.sqrt()),
            TransformKind::BfgsFactor,
        )
        .unwrap();
        let t_plus = bfgs_update_factored(&t, &v(&[1.0]), &v(&[-0.5])).unwrap();
        assert!((t_plus.matrix()[(0, 0)] - 2.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((t_plus.gram().matrix()[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn factored_collinear_secant_is_pure_rescaling() {
        let t = RescalingTransform::identity(3);
        let g = v(&[1.0, 2.0, 2.0]) / 3.0;
        // s = -g; g_plus = g/2 gives y = -g/2 parallel to s
        let g_plus = &g * 0.5;
        let t_plus = bfgs_update_factored(&t, &g, &g_plus).unwrap();
        let h_plus = t_plus.gram();
        let s = -&g;
        let y = &g_plus - &g;
        assert!((h_plus.mul_vec(&y) - &s).norm() < 1e-14);
        // directions orthogonal to s are untouched
        let w = v(&[2.0, -1.0, 0.0]);
        assert!((h_plus.mul_vec(&w) - &w).norm() < 1e-14);
    }

    #[test]
    fn factored_rejects_non_descent() {
        let t = RescalingTransform::identity(2);
        assert!(matches!(
            bfgs_update_factored(&t, &v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(RescaleError::CurvatureViolation { .. })
        ));
    }

    #[test]
    fn w_matrix_collapses_at_origin() {
        let w = bfgs_w_matrix(&v(&[1.0, 0.0]), &v(&[0.0, 0.0])).unwrap();
        assert!((w.matrix() - Matrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn w_matrix_two_by_two() {
        let w = bfgs_w_matrix(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap();
        // explicit assembly: e = (2,0), beta = 2
        let e = v(&[2.0, 0.0]);
        let h = v(&[1.0, 0.0]);
        let assembled =
            Matrix::identity(2, 2) - (&e * h.transpose()) / 2.0 + (&h * h.transpose()) / 2f64.sqrt();
        assert!((w.matrix() - &assembled).norm() < 1e-15);
        assert!((w.apply(&h) - v(&[1.0 / 2f64.sqrt(), 0.0])).norm() < 1e-15);
    }

    #[test]
    fn w_matrix_is_rank_one_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 20 {
            let h = standard_normal_vector(5, &mut rng);
            let p = standard_normal_vector(5, &mut rng);
            if h.dot(&(&h - &p)) <= 1e-3 {
                continue;
            }
            let w = bfgs_w_matrix(&h, &p).unwrap();
            let diff = w.matrix() - Matrix::identity(5, 5);
            let sv = diff.svd(false, false).singular_values;
            let mut sorted: Vec<f64> = sv.iter().copied().collect();
            sorted.sort_by(|a, b| b.total_cmp(a));
            assert!(sorted[1] <= 1e-10, "second singular value {}", sorted[1]);
            checked += 1;
        }
    }

    #[test]
    fn w_matrix_rejects_nonpositive_beta() {
        let h = v(&[1.0, 0.0]);
        assert!(matches!(
            bfgs_w_matrix(&h, &h),
            Err(RescaleError::DegenerateCurvature(_))
        ));
        assert!(matches!(
            bfgs_w_matrix(&h, &v(&[2.0, 0.0])),
            Err(RescaleError::DegenerateCurvature(_))
        ));
    }

    #[test]
    fn ellipsoid_step_by_hand() {
        let step = ellipsoid_update(&SpdMatrix::identity(2), &v(&[1.0, 0.0])).unwrap();
        assert!((step.increment - v(&[-1.0 / 3.0, 0.0])).norm() < 1e-15);
        let expected = Matrix::from_diagonal(&v(&[4.0 / 9.0, 4.0 / 3.0]));
        assert!((step.h_plus.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn ellipsoid_increment_is_scale_free_in_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = random_spd(4, 1.0, &mut rng);
        let g = standard_normal_vector(4, &mut rng);
        let a = ellipsoid_update(&h, &g).unwrap();
        let b = ellipsoid_update(&h, &(&g * 37.5)).unwrap();
        assert!((a.increment - b.increment).norm() < 1e-13);
        assert!((a.h_plus.matrix() - b.h_plus.matrix()).norm() < 1e-12);
    }

    #[test]
    fn ellipsoid_volume_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let n = 5;
        let nf = n as f64;
        let expected = (nf * nf / (nf * nf - 1.0)).powi(n as i32) * (nf - 1.0) / (nf + 1.0);
        for _ in 0..10 {
            let h = random_spd(n, 1.0, &mut rng);
            let g = standard_normal_vector(n, &mut rng);
            let step = ellipsoid_update(&h, &g).unwrap();
            let ratio = step.h_plus.determinant() / h.determinant();
            assert!(((ratio - expected) / expected).abs() < 1e-9);
        }
    }

    #[test]
    fn ellipsoid_rejects_degenerate_inputs() {
        assert!(matches!(
            ellipsoid_update(&SpdMatrix::identity(2), &v(&[0.0, 0.0])),
            Err(RescaleError::DegenerateGradient(_))
        ));
        assert!(matches!(
            ellipsoid_update(&SpdMatrix::identity(1), &v(&[1.0])),
            Err(RescaleError::InvalidDimension(1))
        ));
    }

    #[test]
    fn composed_transform_order() {
        let a = shor_dilation(&v(&[1.0, 0.0]), 2.0).unwrap();
        let b = shor_dilation(&v(&[0.0, 1.0]), 4.0).unwrap();
        let ab = a.then(&b);
        let x = v(&[1.0, 1.0]);
        assert!((ab.apply(&x) - b.apply(&a.apply(&x))).norm() < 1e-15);
        assert_eq!(ab.kind(), TransformKind::ShorDilation);
    }
}
