//! Separation algorithms: decide `0 in conv S` from a linear-optimization
//! oracle over `S`, or return a normal `d` with `<q, d> < 0` on all of `S`.
//!
//! All runs are deterministic given their inputs and [`SeparatorConfig`].
//! Termination tests use the strict comparisons of the underlying methods;
//! ties keep iterating.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RescaleError, Result};
use crate::linalg::{check_dim, cosine, random_unit_vector, Matrix, SpdMatrix, Vector};
use crate::oracles::{transformed_argmin, BallOracle, EllipsoidOracle, FiniteSetOracle, SupportOracle};
use crate::trace::{Outcome, RunTrace, TraceRow};
use crate::updates::{
    bfgs_update_with_step, ellipsoid_update, shor_dilation, RescalingTransform, BETA_FLOOR,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeparatorConfig {
    /// Cap on the number of updates; a run records at most this many + 1 rows.
    pub max_iterations: usize,
    pub step_tol: f64,
    pub dilation_beta: f64,
    pub seed: u64,
    /// Record `det H`, `lambda_min`, `lambda_max` per row (O(n^3) each).
    pub record_spectrum: bool,
    /// Record the first two coordinates of the current iterate per row.
    pub record_projection: bool,
    /// Vanishing-step rule of [`bfgs_separate`] and [`bfgs_separate_hull`].
    pub step_test: StepTest,
}

impl Default for SeparatorConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            step_tol: 1e-12,
            dilation_beta: 2.0,
            seed: 0,
            record_spectrum: true,
            record_projection: false,
            step_test: StepTest::Metric,
        }
    }
}

impl SeparatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(RescaleError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.step_tol > 0.0) {
            return Err(RescaleError::InvalidConfig("step_tol must be > 0".into()));
        }
        if !(self.dilation_beta > 1.0) || !self.dilation_beta.is_finite() {
            return Err(RescaleError::InvalidDilation(self.dilation_beta));
        }
        Ok(())
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_step_tol(mut self, step_tol: f64) -> Self {
        self.step_tol = step_tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_step_test(mut self, step_test: StepTest) -> Self {
        self.step_test = step_test;
        self
    }

    pub fn without_spectrum(mut self) -> Self {
        self.record_spectrum = false;
        self
    }
}

pub(crate) struct TraceBuilder {
    name: &'static str,
    rows: Vec<TraceRow>,
    started: Instant,
}

impl TraceBuilder {
    pub(crate) fn new(name: &'static str) -> Self {
        Self {
            name,
            rows: Vec::new(),
            started: Instant::now(),
        }
    }

    pub(crate) fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub(crate) fn finish(self, outcome: Outcome, updates: usize) -> RunTrace {
        RunTrace {
            algorithm: self.name.to_string(),
            rows: self.rows,
            outcome,
            updates,
            final_point: None,
            wall_time: self.started.elapsed(),
        }
    }
}

fn projection(v: &Vector, enabled: bool) -> Option<(f64, f64)> {
    enabled.then(|| (v[0], if v.len() > 1 { v[1] } else { 0.0 }))
}

fn spectrum_fields(row: &mut TraceRow, h: &SpdMatrix) {
    let (lo, hi) = h.eigen_extremes();
    row.det_h = Some(h.determinant());
    row.lambda_min = Some(lo);
    row.lambda_max = Some(hi);
}

/// Shor updating for `0 in conv Q`.
///
/// Starting from `h in Q`, repeatedly minimize `<., h>` over the current set
/// `V Q`; stop when the minimum is positive, otherwise dilate along
/// `e = h - p` and continue from the transformed minimizer. The set is never
/// rewritten: `V` accumulates the dilations and queries go through
/// [`transformed_argmin`].
///
/// On separation the returned normal is `-V^T h`.
///
/// Every dilation shrinks the iterates, so `V` and `h` are rescaled together
/// to `|V|_F = 1` after each update. The method is invariant under that
/// rescaling; it keeps the vectors away from underflow and makes the
/// `|h| <= step_tol` test relative to the current transform.
pub fn shor_separate<O: SupportOracle + ?Sized>(
    oracle: &O,
    start: &Vector,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    check_dim(oracle.dim(), start.len())?;
    shor_loop("shor", oracle, start.clone(), cfg)
}

fn shor_loop<O: SupportOracle + ?Sized>(
    name: &'static str,
    oracle: &O,
    mut h: Vector,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    let n = oracle.dim();
    let mut trace = TraceBuilder::new(name);
    let mut v = RescalingTransform::identity(n);
    for k in 0..=cfg.max_iterations {
        let h_norm = h.norm();
        if h_norm <= cfg.step_tol {
            trace.push(TraceRow {
                k,
                step_norm: h_norm,
                projection: projection(&h, cfg.record_projection),
                ..Default::default()
            });
            return Ok(trace.finish(Outcome::StepVanished, k));
        }
        let (p, ph) = transformed_argmin(oracle, &v, &h)?;
        trace.push(TraceRow {
            k,
            step_norm: h_norm,
            statistic: Some(ph),
            cosine: Some(cosine(&p, &h)),
            projection: projection(&h, cfg.record_projection),
            ..Default::default()
        });
        if ph > 0.0 {
            let normal = -v.apply_transpose(&h);
            return Ok(trace.finish(Outcome::Separated { normal }, k));
        }
        if k == cfg.max_iterations {
            break;
        }
        let e = &h - &p;
        let w = match shor_dilation(&e, cfg.dilation_beta) {
            Ok(w) => w,
            Err(RescaleError::DegenerateDirection { .. }) => {
                return Ok(trace.finish(Outcome::StepVanished, k));
            }
            Err(err) => return Err(err),
        };
        v = v.then(&w);
        h = w.apply(&p) / v.normalize();
    }
    Ok(trace.finish(Outcome::MaxIterations, cfg.max_iterations))
}

/// Shor updating to separate `c` from the ellipsoid `A B`.
///
/// Runs [`shor_separate`] on the boundary of `A B - c` from
/// `h = A x - c`. On separation the normal `z` satisfies
/// `|A^T z| < c^T z` for the original data.
pub fn shor_separate_ellipsoid(
    a: &Matrix,
    c: &Vector,
    start_unit: &Vector,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    let oracle = EllipsoidOracle::new(a.clone(), c.clone())?;
    check_dim(oracle.dim(), start_unit.len())?;
    let norm = start_unit.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(RescaleError::InvalidConfig(format!(
            "start vector must be a unit vector, norm is {norm}"
        )));
    }
    let h = a * start_unit - c;
    shor_loop("shor_ellipsoid", &oracle, h, cfg)
}

/// Randomized Shor updating: each iteration restarts from the minimizer
/// `h` of `<., u>` over the current set for a fresh random unit `u`
/// (componentwise standard normal, normalized), drawn from a ChaCha stream
/// seeded with `cfg.seed`.
///
/// On separation the returned normal is `-V^T h`: every point of `V Q` has
/// `<., h> >= p^T h > 0`, which does not hold for `p` in place of `h`.
pub fn randomized_shor_separate<O: SupportOracle + ?Sized>(
    oracle: &O,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    let n = oracle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = TraceBuilder::new("shor_randomized");
    let mut v = RescalingTransform::identity(n);
    for k in 0..=cfg.max_iterations {
        let u = random_unit_vector(n, &mut rng);
        let (h, _) = transformed_argmin(oracle, &v, &u)?;
        let h_norm = h.norm();
        if h_norm <= cfg.step_tol {
            trace.push(TraceRow {
                k,
                step_norm: h_norm,
                ..Default::default()
            });
            return Ok(trace.finish(Outcome::StepVanished, k));
        }
        let (p, ph) = transformed_argmin(oracle, &v, &h)?;
        trace.push(TraceRow {
            k,
            step_norm: h_norm,
            statistic: Some(ph),
            cosine: Some(cosine(&p, &h)),
            projection: projection(&h, cfg.record_projection),
            ..Default::default()
        });
        if ph > 0.0 {
            let normal = -v.apply_transpose(&h);
            return Ok(trace.finish(Outcome::Separated { normal }, k));
        }
        if k == cfg.max_iterations {
            break;
        }
        let e = &h - &p;
        let w = match shor_dilation(&e, cfg.dilation_beta) {
            Ok(w) => w,
            Err(RescaleError::DegenerateDirection { .. }) => {
                return Ok(trace.finish(Outcome::StepVanished, k));
            }
            Err(err) => return Err(err),
        };
        v = v.then(&w);
        v.normalize();
    }
    Ok(trace.finish(Outcome::MaxIterations, cfg.max_iterations))
}

/// When the BFGS separators declare that the step has vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepTest {
    /// `|s| <= step_tol * |H|_F * |g|`. Invariant under rescaling `H`, so it
    /// fires only when `g` is numerically in the null space of the metric.
    #[default]
    Metric,
    /// `|s| <= step_tol * |s_0|`.
    Initial,
}

#[derive(Clone, Copy)]
struct BfgsLoop {
    name: &'static str,
    /// Test `g = 0` (within `step_tol`) before each step.
    membership_test: bool,
    step_test: StepTest,
}

/// `H = 2^exp * unit` with `|unit|_F` kept within `[2^-64, 2^64]`.
///
/// The BFGS update is positively homogeneous in `H`, and the determinant
/// decreases at every update of a separator run, so long runs would
/// underflow without the separate exponent. Power-of-two scaling is exact.
struct ScaledMetric {
    unit: SpdMatrix,
    exp: i32,
}

impl ScaledMetric {
    const BAND: i32 = 64;

    fn new(h: &SpdMatrix) -> Self {
        let mut m = Self {
            unit: h.clone(),
            exp: 0,
        };
        m.rebalance();
        m
    }

    fn rebalance(&mut self) {
        let norm = self.unit.matrix().norm();
        let log = norm.log2().round() as i32;
        if log.abs() > Self::BAND {
            self.unit = SpdMatrix::from_update(self.unit.matrix() * 2f64.powi(-log));
            self.exp += log;
        }
    }

    fn factor(&self) -> f64 {
        2f64.powi(self.exp)
    }

    fn spectrum(&self, row: &mut TraceRow) {
        let (lo, hi) = self.unit.eigen_extremes();
        let n = self.unit.dim() as f64;
        let det = self.unit.determinant();
        row.det_h = Some(if det > 0.0 {
            (det.ln() + n * self.exp as f64 * std::f64::consts::LN_2).exp()
        } else {
            det
        });
        row.lambda_min = Some(lo * self.factor());
        row.lambda_max = Some(hi * self.factor());
    }
}

fn bfgs_loop<O: SupportOracle + ?Sized>(
    spec: BfgsLoop,
    oracle: &O,
    g0: &Vector,
    h0: &SpdMatrix,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    check_dim(oracle.dim(), g0.len())?;
    check_dim(oracle.dim(), h0.dim())?;
    let mut trace = TraceBuilder::new(spec.name);
    let mut g = g0.clone();
    let mut h = ScaledMetric::new(h0);
    let mut initial: Option<(f64, i32)> = None;
    for k in 0..=cfg.max_iterations {
        let mut row = TraceRow {
            k,
            projection: projection(&g, cfg.record_projection),
            ..Default::default()
        };
        if cfg.record_spectrum {
            h.spectrum(&mut row);
        }
        if spec.membership_test && g.norm() <= cfg.step_tol {
            row.step_norm = 0.0;
            trace.push(row);
            return Ok(trace.finish(Outcome::MembershipCertified, k));
        }
        // `s_unit` is `s` divided by `2^exp`.
        let s_unit = -h.unit.mul_vec(&g);
        let s_unit_norm = s_unit.norm();
        row.step_norm = s_unit_norm * h.factor();
        let (s0_norm, s0_exp) = *initial.get_or_insert((s_unit_norm, h.exp));
        let vanished = match spec.step_test {
            StepTest::Metric => s_unit_norm <= cfg.step_tol * h.unit.matrix().norm() * g.norm(),
            StepTest::Initial => {
                s_unit_norm * 2f64.powi(h.exp - s0_exp) <= cfg.step_tol * s0_norm
            }
        };
        if vanished {
            trace.push(row);
            return Ok(trace.finish(Outcome::StepVanished, k));
        }
        let (g_plus, _) = oracle.argmax_linear(&s_unit)?;
        let stat_unit = g_plus.dot(&s_unit);
        row.statistic = Some(stat_unit * h.factor());
        trace.push(row);
        if stat_unit < 0.0 {
            let factor = h.factor();
            let normal = if factor >= f64::MIN_POSITIVE {
                s_unit * factor
            } else {
                s_unit
            };
            return Ok(trace.finish(Outcome::Separated { normal }, k));
        }
        if k == cfg.max_iterations {
            break;
        }
        let y = &g_plus - &g;
        match bfgs_update_with_step(&h.unit, &s_unit, &y) {
            Ok(next) => {
                h.unit = next;
                h.rebalance();
            }
            Err(err) if err.is_curvature() => {
                return Ok(trace.finish(Outcome::CurvatureFailure, k));
            }
            Err(err) => return Err(err),
        }
        g = g_plus;
    }
    Ok(trace.finish(Outcome::MaxIterations, cfg.max_iterations))
}

/// BFGS updating for `0 in C`: certify membership when `g = 0` (within
/// `step_tol`), separate with `s = -H g` when `max_C <., s> < 0`, otherwise
/// take the maximizer as the new `g` and apply the unit-step BFGS update.
///
/// The step test is `cfg.step_test`. On a set with `0` in its interior `s`
/// shrinks toward `0` while `H` stays well shaped, so only
/// [`StepTest::Initial`] ends such runs early.
pub fn bfgs_separate<O: SupportOracle + ?Sized>(
    oracle: &O,
    start: &Vector,
    h0: &SpdMatrix,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    let spec = BfgsLoop {
        name: "bfgs",
        membership_test: true,
        step_test: cfg.step_test,
    };
    bfgs_loop(spec, oracle, start, h0, cfg)
}

/// BFGS updating for `0 in conv D`, `D` a finite set without the origin,
/// started at `D[start_index]`.
pub fn bfgs_separate_hull(
    points: &FiniteSetOracle,
    start_index: usize,
    h0: &SpdMatrix,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    if points.contains_origin_point() {
        return Err(RescaleError::InvalidInstance("point set contains 0".into()));
    }
    let start = points
        .points()
        .get(start_index)
        .ok_or_else(|| RescaleError::InvalidConfig(format!("start index {start_index}")))?;
    let spec = BfgsLoop {
        name: "bfgs_hull",
        membership_test: false,
        step_test: cfg.step_test,
    };
    bfgs_loop(spec, points, start, h0, cfg)
}

/// The BFGS iteration on the unit ball: `g_+ = s / |s|` every step.
///
/// The set contains the origin, so the run never separates; it ends with
/// [`Outcome::StepVanished`] once `|s| <= step_tol * |s_0|`, regardless of
/// `cfg.step_test`.
pub fn unit_ball_iteration(g0: &Vector, h0: &SpdMatrix, cfg: &SeparatorConfig) -> Result<RunTrace> {
    let norm = g0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(RescaleError::InvalidConfig(format!(
            "initial g must be a unit vector, norm is {norm}"
        )));
    }
    let spec = BfgsLoop {
        name: "unit_ball",
        membership_test: false,
        step_test: StepTest::Initial,
    };
    bfgs_loop(spec, &BallOracle::unit(g0.len()), g0, h0, cfg)
}

/// Central-cut ellipsoid method over the unit ball for `0 in conv D`.
///
/// Starts at `x = 0`, `H = I`. Inside the ball the cut is the maximizer of
/// `<., x>` (at `x = 0` every point ties and the lowest index wins); outside,
/// the cut is `x` itself. Separates with `x` once `max_D <., x> < 0`.
pub fn ellipsoid_separate<O: SupportOracle + ?Sized>(
    points: &O,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    let n = points.dim();
    if n < 2 {
        return Err(RescaleError::InvalidDimension(n));
    }
    let mut trace = TraceBuilder::new("ellipsoid");
    let mut x = Vector::zeros(n);
    let mut h = SpdMatrix::identity(n);
    for k in 0..=cfg.max_iterations {
        let mut row = TraceRow {
            k,
            step_norm: x.norm(),
            projection: projection(&x, cfg.record_projection),
            ..Default::default()
        };
        if cfg.record_spectrum {
            spectrum_fields(&mut row, &h);
        }
        let g = if x.norm() > 1.0 {
            trace.push(row);
            x.clone()
        } else {
            let (g, _) = points.argmax_linear(&x)?;
            let stat = g.dot(&x);
            row.statistic = Some(stat);
            trace.push(row);
            if stat < 0.0 {
                return Ok(trace.finish(Outcome::Separated { normal: x }, k));
            }
            g
        };
        if k == cfg.max_iterations {
            break;
        }
        let step = match ellipsoid_update(&h, &g) {
            Ok(step) => step,
            Err(RescaleError::DegenerateGradient(_)) => {
                return Ok(trace.finish(Outcome::StepVanished, k));
            }
            Err(err) => return Err(err),
        };
        x += step.increment;
        h = step.h_plus;
    }
    Ok(trace.finish(Outcome::MaxIterations, cfg.max_iterations))
}

/// Factored BFGS for `0 in conv {a_i}` operating directly on the points.
///
/// Each iteration finds `j` minimizing `a_i^T a_j`, separates if that minimum
/// is positive, and otherwise rewrites every point by
/// `a_r <- a_r - (a_i^T a_r)(e / beta - a_i / (|a_i| sqrt(beta)))` with
/// `e = a_i - a_j`, `beta = a_i^T e`, then moves to `i = j`. The transform
/// `T` applied so far is accumulated so the normal `-T^T a_i` can be reported
/// in the original coordinates.
///
/// The rewrite is positively homogeneous, so points and `T` are rescaled
/// together by powers of two to stay clear of underflow. The step has
/// vanished once `|a_i| <= step_tol * max_r |a_r|`.
pub fn cholesky_bfgs_separate(
    points: &[Vector],
    start_index: usize,
    cfg: &SeparatorConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    let set = FiniteSetOracle::new(points.to_vec())?;
    if set.contains_origin_point() {
        return Err(RescaleError::InvalidInstance("point set contains 0".into()));
    }
    if start_index >= points.len() {
        return Err(RescaleError::InvalidConfig(format!("start index {start_index}")));
    }
    let n = set.dim();
    let mut a: Vec<Vector> = points.to_vec();
    let mut t = Matrix::identity(n, n);
    let mut exp = 0;
    let mut i = start_index;
    let mut trace = TraceBuilder::new("bfgs_cholesky");
    for k in 0..=cfg.max_iterations {
        let ai = a[i].clone();
        let ai_norm = ai.norm();
        let s = -t.tr_mul(&ai);
        let mut row = TraceRow {
            k,
            step_norm: ai_norm * 2f64.powi(exp),
            projection: projection(&ai, cfg.record_projection),
            ..Default::default()
        };
        if cfg.record_spectrum {
            factor_spectrum(&mut row, &t, exp);
        }
        let scale = a.iter().map(|ar| ar.norm()).fold(0.0, f64::max);
        if ai_norm <= cfg.step_tol * scale {
            trace.push(row);
            return Ok(trace.finish(Outcome::StepVanished, k));
        }
        let mut j = 0;
        let mut best = ai.dot(&a[0]);
        for (r, ar) in a.iter().enumerate().skip(1) {
            let v = ai.dot(ar);
            if v < best {
                best = v;
                j = r;
            }
        }
        row.statistic = Some(best * 4f64.powi(exp));
        row.cosine = Some(cosine(&a[j], &ai));
        trace.push(row);
        if best > 0.0 {
            return Ok(trace.finish(Outcome::Separated { normal: s }, k));
        }
        if k == cfg.max_iterations {
            break;
        }
        let e = &ai - &a[j];
        let beta = ai.dot(&e);
        if !(beta > BETA_FLOOR) {
            return Ok(trace.finish(Outcome::CurvatureFailure, k));
        }
        let coeff = &e / beta - &ai / (ai_norm * beta.sqrt());
        for ar in a.iter_mut() {
            let inner = ai.dot(ar);
            ar.axpy(-inner, &coeff, 1.0);
        }
        let tta = t.tr_mul(&ai);
        t.ger(-1.0, &coeff, &tta, 1.0);
        exp += rebalance(&mut a, &mut t);
        i = j;
    }
    Ok(trace.finish(Outcome::MaxIterations, cfg.max_iterations))
}

/// Scales `points` and `t` by a common power of two when the largest point
/// norm leaves `[2^-64, 2^64]`; returns the exponent removed.
fn rebalance(points: &mut [Vector], t: &mut Matrix) -> i32 {
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let log = scale.log2().round() as i32;
    if log.abs() <= 64 || !scale.is_finite() || scale == 0.0 {
        return 0;
    }
    let factor = 2f64.powi(-log);
    for p in points.iter_mut() {
        *p *= factor;
    }
    *t *= factor;
    log
}

/// Spectrum of `H = T^T T` for `T = 2^exp * t`.
fn factor_spectrum(row: &mut TraceRow, t: &Matrix, exp: i32) {
    let gram = SpdMatrix::from_update(t.tr_mul(t));
    let (lo, hi) = gram.eigen_extremes();
    let det_t = t.clone().lu().determinant().abs();
    let n = t.nrows() as f64;
    let scale = 4f64.powi(exp);
    row.det_h = Some(if det_t > 0.0 {
        (2.0 * (det_t.ln() + n * exp as f64 * std::f64::consts::LN_2)).exp()
    } else {
        0.0
    });
    row.lambda_min = Some(lo * scale);
    row.lambda_max = Some(hi * scale);
}

/// Conditioning measure of a segment:
/// `sqrt(|c|^2 |d|^2 - (c^T d)^2) / |c - d|^2`.
pub fn segment_gamma(c: &Vector, d: &Vector) -> f64 {
    let cross = (c.norm_squared() * d.norm_squared() - c.dot(d).powi(2)).max(0.0);
    cross.sqrt() / (c - d).norm_squared()
}

/// Upper bound on the iterations of [`segment_separate`] when `0` is not in
/// `[c, d]`: `ceil(|c - d|^4 / (|c|^2 |d|^2 - (c^T d)^2))`. Infinite when the
/// segment is collinear with the origin.
pub fn segment_iteration_bound(c: &Vector, d: &Vector) -> f64 {
    let cross = c.norm_squared() * d.norm_squared() - c.dot(d).powi(2);
    if cross <= 0.0 {
        return f64::INFINITY;
    }
    ((c - d).norm_squared().powi(2) / cross).ceil()
}

/// Factored BFGS for `0 in [c, d]`: while `c^T d <= 0`, update both
/// endpoints with the W built from `h = c`, `p = d`, then swap roles.
/// Records `gamma[c, d]` in each row.
///
/// Endpoints are rebalanced like the points of [`cholesky_bfgs_separate`];
/// the step has vanished once `|c| <= step_tol * max(|c|, |d|)`.
pub fn segment_separate(c: &Vector, d: &Vector, cfg: &SeparatorConfig) -> Result<RunTrace> {
    cfg.validate()?;
    check_dim(c.len(), d.len())?;
    if c == d {
        return Err(RescaleError::InvalidInstance("segment endpoints coincide".into()));
    }
    if c.iter().all(|&x| x == 0.0) || d.iter().all(|&x| x == 0.0) {
        return Err(RescaleError::InvalidInstance("segment endpoint is 0".into()));
    }
    let n = c.len();
    let mut ends = [c.clone(), d.clone()];
    let mut t = Matrix::identity(n, n);
    let mut exp = 0;
    let mut trace = TraceBuilder::new("segment");
    for k in 0..=cfg.max_iterations {
        let [c, d] = &ends;
        let c_norm = c.norm();
        let ctd = c.dot(d);
        let mut row = TraceRow {
            k,
            step_norm: c_norm * 2f64.powi(exp),
            statistic: Some(ctd * 4f64.powi(exp)),
            cosine: Some(cosine(c, d)),
            gamma: Some(segment_gamma(c, d)),
            projection: projection(c, cfg.record_projection),
            ..Default::default()
        };
        if cfg.record_spectrum {
            factor_spectrum(&mut row, &t, exp);
        }
        trace.push(row);
        if c_norm <= cfg.step_tol * c_norm.max(d.norm()) {
            return Ok(trace.finish(Outcome::StepVanished, k));
        }
        if ctd > 0.0 {
            let normal = -t.tr_mul(c);
            return Ok(trace.finish(Outcome::Separated { normal }, k));
        }
        if k == cfg.max_iterations {
            break;
        }
        let e = c - d;
        let beta = c.dot(&e);
        if !(beta > BETA_FLOOR) {
            return Ok(trace.finish(Outcome::CurvatureFailure, k));
        }
        let coeff = &e / beta - c / (c_norm * beta.sqrt());
        let d_plus = d - &coeff * ctd;
        let c_plus = c - &coeff * c.norm_squared();
        let ttc = t.tr_mul(c);
        t.ger(-1.0, &coeff, &ttc, 1.0);
        ends = [d_plus, c_plus];
        exp += rebalance(&mut ends, &mut t);
    }
    Ok(trace.finish(Outcome::MaxIterations, cfg.max_iterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn cfg() -> SeparatorConfig {
        SeparatorConfig::default()
    }

    #[test]
    fn config_validation() {
        assert!(cfg().with_max_iterations(0).validate().is_err());
        assert!(cfg().with_step_tol(0.0).validate().is_err());
        let mut bad = cfg();
        bad.dilation_beta = 1.0;
        assert!(matches!(bad.validate(), Err(RescaleError::InvalidDilation(_))));
    }

    #[test]
    fn shor_singleton_separates_immediately() {
        let set = FiniteSetOracle::new(vec![v(&[1.0, 0.0])]).unwrap();
        let trace = shor_separate(&set, &v(&[1.0, 0.0]), &cfg()).unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.updates, 0);
        assert_eq!(trace.outcome.normal().unwrap(), &v(&[-1.0, 0.0]));
    }

    #[test]
    fn shor_ellipsoid_far_ball() {
        // ball of radius 1 around (3, 0): h = (-2, 0), p = (-4, 0), p^T h = 8
        let trace =
            shor_separate_ellipsoid(&Matrix::identity(2, 2), &v(&[3.0, 0.0]), &v(&[1.0, 0.0]), &cfg())
                .unwrap();
        assert!(trace.outcome.is_separated());
        assert!(trace.updates <= 2);
        let z = trace.outcome.normal().unwrap();
        assert!(Matrix::identity(2, 2).tr_mul(z).norm() < v(&[3.0, 0.0]).dot(z));
    }

    #[test]
    fn shor_ellipsoid_rejects_non_unit_start() {
        let err = shor_separate_ellipsoid(
            &Matrix::identity(2, 2),
            &v(&[3.0, 0.0]),
            &v(&[2.0, 0.0]),
            &cfg(),
        );
        assert!(matches!(err, Err(RescaleError::InvalidConfig(_))));
    }

    #[test]
    fn randomized_singleton() {
        let set = FiniteSetOracle::new(vec![v(&[1.0, 0.0])]).unwrap();
        let trace = randomized_shor_separate(&set, &cfg().with_seed(9)).unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.outcome.normal().unwrap(), &v(&[-1.0, 0.0]));
    }

    #[test]
    fn bfgs_shifted_ball_by_hand() {
        let ball = BallOracle::new(v(&[3.0, 0.0]), 1.0).unwrap();
        let trace = bfgs_separate(&ball, &v(&[4.0, 0.0]), &SpdMatrix::identity(2), &cfg()).unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.rows[0].statistic, Some(-8.0));
        assert_eq!(trace.outcome.normal().unwrap(), &v(&[-4.0, 0.0]));
    }

    #[test]
    fn bfgs_origin_singleton_certifies_membership() {
        let set = FiniteSetOracle::new(vec![v(&[0.0, 0.0])]).unwrap();
        let trace = bfgs_separate(&set, &v(&[0.0, 0.0]), &SpdMatrix::identity(2), &cfg()).unwrap();
        assert_eq!(trace.outcome, Outcome::MembershipCertified);
    }

    #[test]
    fn bfgs_unit_ball_step_vanishes() {
        let h0 = SpdMatrix::new(Matrix::from_row_slice(
            3,
            3,
            &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0],
        ))
        .unwrap();
        let g0 = v(&[0.0, 0.6, 0.8]);
        let initial = cfg().with_step_test(StepTest::Initial);
        let trace = bfgs_separate(&BallOracle::unit(3), &g0, &h0, &initial).unwrap();
        assert_eq!(trace.outcome, Outcome::StepVanished);
        let first = trace.rows[0].step_norm;
        assert!(trace.rows.last().unwrap().step_norm <= 1e-12 * first);
        // the metric test does not fire: H shrinks without degenerating
        let metric = cfg().with_max_iterations(300);
        let trace = bfgs_separate(&BallOracle::unit(3), &g0, &h0, &metric).unwrap();
        assert_eq!(trace.outcome, Outcome::MaxIterations);
        assert!(trace.rows.last().unwrap().step_norm < 1e-30 * first);
    }

    #[test]
    fn hull_axis_pair_separates_with_valid_certificate() {
        let set = FiniteSetOracle::new(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let trace = bfgs_separate_hull(&set, 0, &SpdMatrix::identity(2), &cfg()).unwrap();
        let z = trace.outcome.normal().unwrap();
        assert!(z.dot(&v(&[1.0, 0.0])) < 0.0 && z.dot(&v(&[0.0, 1.0])) < 0.0);
    }

    #[test]
    fn hull_symmetric_cross_halves_determinant() {
        let set = FiniteSetOracle::new(vec![
            v(&[1.0, 0.0]),
            v(&[-1.0, 0.0]),
            v(&[0.0, 1.0]),
            v(&[0.0, -1.0]),
        ])
        .unwrap();
        let trace =
            bfgs_separate_hull(&set, 0, &SpdMatrix::identity(2), &cfg().with_max_iterations(40))
                .unwrap();
        assert!(!trace.outcome.is_separated());
        for (k, row) in trace.rows.iter().enumerate() {
            let det = row.det_h.unwrap();
            assert!(det <= 0.5f64.powi(k as i32) * (1.0 + 1e-10), "k={k} det={det}");
        }
    }

    #[test]
    fn hull_rejects_origin_point() {
        let set = FiniteSetOracle::new(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])]).unwrap();
        assert!(bfgs_separate_hull(&set, 1, &SpdMatrix::identity(2), &cfg()).is_err());
    }

    #[test]
    fn ellipsoid_single_point() {
        let set = FiniteSetOracle::new(vec![v(&[1.0, 0.0])]).unwrap();
        let trace = ellipsoid_separate(&set, &cfg()).unwrap();
        // margin r = 1: budget 2 n (n+1) ln(1/r) is 0, so allow a small constant
        assert!(trace.outcome.is_separated());
        assert!(trace.updates <= 4, "{} updates", trace.updates);
        // first cut at x = 0 is the lowest-index point
        assert_eq!(trace.rows[0].statistic, Some(0.0));
        assert!(trace.outcome.normal().unwrap()[0] < 0.0);
    }

    #[test]
    fn cholesky_axis_pair_matches_hull() {
        let pts = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let chol = cholesky_bfgs_separate(&pts, 0, &cfg()).unwrap();
        let set = FiniteSetOracle::new(pts).unwrap();
        let hull = bfgs_separate_hull(&set, 0, &SpdMatrix::identity(2), &cfg()).unwrap();
        assert!(chol.outcome.is_separated());
        assert_eq!(chol.updates, hull.updates);
        let (zc, zh) = (chol.outcome.normal().unwrap(), hull.outcome.normal().unwrap());
        assert!((zc - zh).norm() < 1e-12);
    }

    #[test]
    fn segment_axis_pair() {
        let trace = segment_separate(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &cfg()).unwrap();
        assert!((trace.rows[0].gamma.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(trace.updates, 1);
        assert!(trace.outcome.is_separated());
        assert_eq!(segment_iteration_bound(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])), 4.0);
    }

    #[test]
    fn segment_through_origin_never_separates() {
        let trace = segment_separate(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0]), &cfg()).unwrap();
        assert!(matches!(
            trace.outcome,
            Outcome::StepVanished | Outcome::MaxIterations
        ));
        assert_eq!(
            segment_iteration_bound(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])),
            f64::INFINITY
        );
    }

    #[test]
    fn segment_agrees_with_cholesky_two_points() {
        let c = v(&[1.0, 0.2]);
        let d = v(&[-1.0, 0.05]);
        let seg = segment_separate(&c, &d, &cfg()).unwrap();
        let chol = cholesky_bfgs_separate(&[c, d], 0, &cfg()).unwrap();
        assert_eq!(seg.updates, chol.updates);
        for (a, b) in seg.rows.iter().zip(&chol.rows) {
            assert!((a.statistic.unwrap() - b.statistic.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_ball_from_identity_halves_along_g() {
        let g0 = v(&[0.6, 0.8, 0.0]);
        let trace = unit_ball_iteration(&g0, &SpdMatrix::identity(3), &cfg().with_step_tol(1e-8))
            .unwrap();
        // H_+ = I - g0 g0^T / 2, g_+ = -g0: |s| halves while g stays on the
        // g0 axis. Rounding eventually leaves that (unstable) axis.
        for k in 0..8 {
            let expected = 0.5f64.powi(k as i32);
            assert!((trace.rows[k].step_norm - expected).abs() < 1e-12 * expected);
        }
        assert_eq!(trace.outcome, Outcome::StepVanished);
    }

    #[test]
    fn unit_ball_rejects_non_unit_start() {
        assert!(unit_ball_iteration(&v(&[2.0, 0.0]), &SpdMatrix::identity(2), &cfg()).is_err());
    }
}
