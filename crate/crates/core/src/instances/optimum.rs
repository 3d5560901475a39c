//! Certified minima of max-of-quadratics objectives, and minimum-norm points
//! of finite hulls.
//!
//! The optimum of `f = max_i q_i` is found through the concave dual
//! `phi(l) = min_x sum_i l_i q_i(x)` over the weight simplex, polished by
//! Newton's method on the optimality system of the active pieces, and
//! accepted only with two certificates: a duality gap `f(x) - phi(l)` and a
//! small distance from `0` to the hull of the active gradients.

use crate::error::{RescaleError, Result};
use crate::linalg::{Matrix, Vector};
use crate::oracles::MaxQuadSubdiff;

/// Result of [`min_norm_point`]: `upper = |sum_i w_i q_i|` bounds the
/// distance from `0` to the hull from above, `lower` from below.
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormPoint {
    pub weights: Vec<f64>,
    pub point: Vector,
    pub upper: f64,
    pub lower: f64,
    pub iterations: usize,
}

/// Pairwise Frank-Wolfe for `min |sum_i w_i q_i|^2` over the weight simplex.
///
/// `lower = max(0, min_i <q_i, u>)` with `u` the current point normalized;
/// every hull point has at least that component along `u`. Stops when
/// `upper - lower <= tol` or after `max_iterations`.
pub fn min_norm_point(points: &[Vector], max_iterations: usize, tol: f64) -> Result<MinNormPoint> {
    let first = points
        .first()
        .ok_or_else(|| RescaleError::InvalidInstance("empty point set".into()))?;
    let n = first.len();
    let m = points.len();
    let gram = Matrix::from_fn(m, m, |i, j| points[i].dot(&points[j]));
    // start at the shortest point
    let start = (0..m)
        .min_by(|&i, &j| gram[(i, i)].total_cmp(&gram[(j, j)]))
        .unwrap_or(0);
    let mut w = vec![0.0; m];
    w[start] = 1.0;
    let mut point = first.clone();
    point.copy_from(&points[start]);
    let mut iterations = 0;
    let (mut upper, mut lower) = bounds(points, &point);
    while iterations < max_iterations && upper - lower > tol {
        iterations += 1;
        // <q_i, point> for all i
        let inner: Vec<f64> = points.iter().map(|q| q.dot(&point)).collect();
        let toward = argmin(&inner, |_| true);
        let away = argmax(&inner, |i| w[i] > 0.0);
        if toward == away {
            break;
        }
        let dir = &points[toward] - &points[away];
        let curvature = dir.norm_squared();
        if curvature == 0.0 {
            break;
        }
        let step = (-point.dot(&dir) / curvature).clamp(0.0, w[away]);
        if step == 0.0 {
            break;
        }
        w[toward] += step;
        w[away] -= step;
        if w[away] < 1e-300 {
            w[away] = 0.0;
        }
        // recompute from the weights to avoid drift
        point = Vector::zeros(n);
        for (wi, q) in w.iter().zip(points) {
            if *wi > 0.0 {
                point.axpy(*wi, q, 1.0);
            }
        }
        (upper, lower) = bounds(points, &point);
    }
    Ok(MinNormPoint {
        weights: w,
        point,
        upper,
        lower,
        iterations,
    })
}

fn bounds(points: &[Vector], point: &Vector) -> (f64, f64) {
    let upper = point.norm();
    if upper == 0.0 {
        return (0.0, 0.0);
    }
    let u = point / upper;
    let lower = points.iter().map(|q| q.dot(&u)).fold(f64::INFINITY, f64::min);
    (upper, lower.max(0.0))
}

fn argmin(values: &[f64], allowed: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if allowed(i) && (best == usize::MAX || v < values[best]) {
            best = i;
        }
    }
    best
}

fn argmax(values: &[f64], allowed: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if allowed(i) && (best == usize::MAX || v > values[best]) {
            best = i;
        }
    }
    best
}

/// Relative duality-gap tolerance accepted by [`reference_optimum`].
pub const GAP_TOL: f64 = 1e-9;
/// Stationarity tolerance accepted by [`reference_optimum`].
pub const STATIONARITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptimum {
    /// `f(x_star)`, an upper bound on `min f`.
    pub f_star: f64,
    pub x_star: Vector,
    /// Dual weights on the pieces.
    pub weights: Vec<f64>,
    /// `phi(weights)`, a lower bound on `min f`.
    pub dual_value: f64,
    /// Distance from `0` to the hull of the active gradients at `x_star`.
    pub stationarity: f64,
}

/// Minimizer `x(l) = -P(l)^-1 b(l)` and value `phi(l)` of the weighted sum.
fn dual_point(f: &MaxQuadSubdiff, weights: &[f64]) -> Option<(Vector, f64)> {
    let n = f.dim();
    let mut p = Matrix::zeros(n, n);
    let mut b = Vector::zeros(n);
    let mut c = 0.0;
    for (w, piece) in weights.iter().zip(f.pieces()) {
        p += piece.p.matrix() * *w;
        b += &piece.b * *w;
        c += w * piece.c;
    }
    let x = -p.cholesky()?.solve(&b);
    let value = 0.5 * x.dot(&b) + c;
    Some((x, value))
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projected gradient ascent on `phi` with backtracking.
fn dual_ascent(f: &MaxQuadSubdiff, iterations: usize) -> Result<Vec<f64>> {
    let m = f.pieces().len();
    let mut weights = vec![1.0 / m as f64; m];
    let (mut x, mut value) = dual_point(f, &weights).ok_or(RescaleError::NotPositiveDefinite)?;
    let mut step = 1.0;
    for _ in 0..iterations {
        let grad = f.piece_values(&x);
        let scale = 1.0 + value.abs();
        let mean: f64 = weights.iter().zip(&grad).map(|(w, g)| w * g).sum();
        let fw_gap = grad.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - mean;
        if fw_gap <= 1e-13 * scale {
            break;
        }
        loop {
            let trial: Vec<f64> = weights.iter().zip(&grad).map(|(w, g)| w + step * g).collect();
            let trial = project_simplex(&trial);
            let (tx, tvalue) = dual_point(f, &trial).ok_or(RescaleError::NotPositiveDefinite)?;
            let mut linear = 0.0;
            let mut dist2 = 0.0;
            for i in 0..m {
                let d = trial[i] - weights[i];
                linear += grad[i] * d;
                dist2 += d * d;
            }
            if tvalue >= value + linear - dist2 / (2.0 * step) - 1e-15 * scale || step < 1e-20 {
                weights = trial;
                x = tx;
                value = tvalue;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(weights)
}

/// Newton's method on the optimality system of the pieces in `support`:
/// `sum l_i grad q_i(x) = 0`, `q_i(x) = t`, `sum l_i = 1`.
fn kkt_polish(f: &MaxQuadSubdiff, support: &[usize], x0: &Vector, weights: &[f64]) -> Option<(Vector, Vec<f64>)> {
    let n = f.dim();
    let k = support.len();
    let pieces = f.pieces();
    let mut x = x0.clone();
    let total: f64 = support.iter().map(|&i| weights[i].max(0.0)).sum();
    let mut l: Vec<f64> = if total > 0.0 {
        support.iter().map(|&i| weights[i].max(0.0) / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    };
    let mut t = support
        .iter()
        .map(|&i| pieces[i].value(&x))
        .fold(f64::NEG_INFINITY, f64::max);
    let dim = n + k + 1;
    for _ in 0..100 {
        let grads: Vec<Vector> = support.iter().map(|&i| pieces[i].gradient(&x)).collect();
        let mut residual = Vector::zeros(dim);
        let mut jac = Matrix::zeros(dim, dim);
        for (j, &i) in support.iter().enumerate() {
            residual.rows_mut(0, n).axpy(l[j], &grads[j], 1.0);
            let mut block = jac.view_mut((0, 0), (n, n));
            block += pieces[i].p.matrix() * l[j];
            jac.view_mut((0, n + j), (n, 1)).copy_from(&grads[j]);
            jac.view_mut((n + j, 0), (1, n)).copy_from(&grads[j].transpose());
            jac[(n + j, n + k)] = -1.0;
            jac[(n + k, n + j)] = 1.0;
            residual[n + j] = pieces[i].value(&x) - t;
        }
        residual[n + k] = l.iter().sum::<f64>() - 1.0;
        let scale = 1.0 + t.abs() + grads.iter().map(|g| g.norm()).fold(0.0, f64::max);
        if residual.amax() <= 1e-14 * scale {
            break;
        }
        let delta = jac.lu().solve(&(-residual))?;
        if !delta.iter().all(|d| d.is_finite()) {
            return None;
        }
        x += delta.rows(0, n);
        for j in 0..k {
            l[j] += delta[n + j];
        }
        t += delta[n + k];
    }
    let mut full = vec![0.0; pieces.len()];
    for (j, &i) in support.iter().enumerate() {
        full[i] = l[j];
    }
    Some((x, full))
}

/// Both certificates for a primal-dual pair, or `None`.
fn certify(f: &MaxQuadSubdiff, x: &Vector, weights: &[f64]) -> Option<ReferenceOptimum> {
    if weights.iter().any(|&w| w < -1e-9 || !w.is_finite()) {
        return None;
    }
    let clipped: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let clipped: Vec<f64> = clipped.iter().map(|w| w / total).collect();
    let (_, dual_value) = dual_point(f, &clipped)?;
    let f_star = f.value(x);
    if !(f_star - dual_value <= GAP_TOL * (1.0 + f_star.abs())) {
        return None;
    }
    let values = f.piece_values(x);
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let active: Vec<Vector> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= top - 1e-9 * (1.0 + top.abs()))
        .map(|(i, _)| f.pieces()[i].gradient(x))
        .collect();
    let mnp = min_norm_point(&active, 100_000, 1e-12).ok()?;
    if !(mnp.upper <= STATIONARITY_TOL) {
        return None;
    }
    Some(ReferenceOptimum {
        f_star,
        x_star: x.clone(),
        weights: clipped,
        dual_value,
        stationarity: mnp.upper,
    })
}

/// Certified minimum of `f = max_i q_i` over strictly convex pieces.
///
/// Returns [`RescaleError::OracleDisagreement`] with the best primal and dual
/// values found when no candidate passes both certificates.
pub fn reference_optimum(f: &MaxQuadSubdiff) -> Result<ReferenceOptimum> {
    let m = f.pieces().len();
    let weights = dual_ascent(f, 20_000)?;
    let (x, dual_value) = dual_point(f, &weights).ok_or(RescaleError::NotPositiveDefinite)?;
    let top = weights.iter().cloned().fold(0.0, f64::max);
    let support: Vec<usize> = (0..m).filter(|&i| weights[i] > 1e-6 * top).collect();
    if let Some(found) = kkt_polish(f, &support, &x, &weights).and_then(|(px, pw)| certify(f, &px, &pw)) {
        return Ok(found);
    }
    // the dual support was ambiguous; try every support, smallest first
    let mut best: Option<ReferenceOptimum> = None;
    if m <= 12 {
        let mut masks: Vec<u32> = (1..(1u32 << m)).collect();
        masks.sort_by_key(|mask| mask.count_ones());
        for mask in masks {
            let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            if let Some(found) = kkt_polish(f, &support, &x, &weights).and_then(|(px, pw)| certify(f, &px, &pw)) {
                if best.as_ref().is_none_or(|b| found.f_star < b.f_star) {
                    best = Some(found);
                }
            }
        }
    }
    best.ok_or(RescaleError::OracleDisagreement {
        lower: dual_value,
        upper: f.value(&x),
    })
}
