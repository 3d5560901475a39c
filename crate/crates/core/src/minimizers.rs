//! BFGS minimization without a line search.
//!
//! Every step here has unit length: `s = -H g`, `x_+ = x + s`. The metric is
//! always updated; the iterate moves only on strict decrease. Subgradients
//! come from [`ObjectiveOracle::subgradient_argmax`], which returns the
//! element of `∂f(x)` maximizing `<., direction>` so that `<g, s>` is the
//! directional derivative along the last step.

use serde::{Deserialize, Serialize};

use crate::error::{RescaleError, Result};
use crate::linalg::{check_dim, Matrix, SpdMatrix, Vector};
use crate::oracles::{FiniteSetOracle, MaxQuadSubdiff, DEFAULT_ACTIVITY_TOL};
use crate::separators::TraceBuilder;
use crate::trace::{Outcome, RunTrace, TraceRow};
use crate::updates::bfgs_update_with_step;

/// A convex objective with a directional subgradient oracle.
pub trait ObjectiveOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &Vector) -> f64;

    /// An element of `∂f(x)` maximizing `<., direction>`. Smooth objectives
    /// ignore `direction` and return the gradient.
    fn subgradient_argmax(&self, x: &Vector, direction: &Vector) -> Vector;
}

impl<T: ObjectiveOracle + ?Sized> ObjectiveOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &Vector) -> f64 {
        (**self).eval(x)
    }
    fn subgradient_argmax(&self, x: &Vector, direction: &Vector) -> Vector {
        (**self).subgradient_argmax(x, direction)
    }
}

impl ObjectiveOracle for MaxQuadSubdiff {
    fn dim(&self) -> usize {
        MaxQuadSubdiff::dim(self)
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.value(x)
    }

    fn subgradient_argmax(&self, x: &Vector, direction: &Vector) -> Vector {
        self.subdiff_argmax(x, direction)
    }
}

/// `1/2 |R x|^2` for an invertible `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    r: Matrix,
    rtr: Matrix,
}

impl Quadratic {
    pub fn new(r: Matrix) -> Result<Self> {
        if !r.is_square() {
            return Err(RescaleError::DimensionMismatch {
                expected: r.nrows(),
                actual: r.ncols(),
            });
        }
        if r.clone().lu().try_inverse().is_none() {
            return Err(RescaleError::Singular);
        }
        let rtr = r.tr_mul(&r);
        Ok(Self { r, rtr })
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }
}

impl ObjectiveOracle for Quadratic {
    fn dim(&self) -> usize {
        self.r.ncols()
    }

    fn eval(&self, x: &Vector) -> f64 {
        0.5 * (&self.r * x).norm_squared()
    }

    fn subgradient_argmax(&self, x: &Vector, _direction: &Vector) -> Vector {
        &self.rtr * x
    }
}

/// The Euclidean norm; `∂f(0)` is the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuclideanNorm {
    pub dim: usize,
}

impl ObjectiveOracle for EuclideanNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector) -> f64 {
        x.norm()
    }

    fn subgradient_argmax(&self, x: &Vector, direction: &Vector) -> Vector {
        let xn = x.norm();
        if xn > 0.0 {
            return x / xn;
        }
        let dn = direction.norm();
        if dn > 0.0 {
            direction / dn
        } else {
            Vector::zeros(self.dim)
        }
    }
}

/// The support function `x -> max_i <a_i, x>` of a finite set; its
/// subdifferential at `0` is `conv {a_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportFunction {
    points: FiniteSetOracle,
    activity_tol: f64,
}

impl SupportFunction {
    pub fn new(points: FiniteSetOracle) -> Self {
        Self {
            points,
            activity_tol: DEFAULT_ACTIVITY_TOL,
        }
    }

    pub fn points(&self) -> &FiniteSetOracle {
        &self.points
    }
}

impl ObjectiveOracle for SupportFunction {
    fn dim(&self) -> usize {
        use crate::oracles::SupportOracle;
        self.points.dim()
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.points.max_inner(x)
    }

    fn subgradient_argmax(&self, x: &Vector, direction: &Vector) -> Vector {
        let values: Vec<f64> = self.points.points().iter().map(|a| a.dot(x)).collect();
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let band = self.activity_tol * (1.0 + top.abs());
        let mut best: Option<(usize, f64)> = None;
        for (i, a) in self.points.points().iter().enumerate() {
            if values[i] < top - band {
                continue;
            }
            let v = a.dot(direction);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
        self.points.points()[best.expect("nonempty set").0].clone()
    }
}

/// A smooth objective from closures.
pub struct SmoothFn<F, G> {
    dim: usize,
    value: F,
    gradient: G,
}

impl<F, G> SmoothFn<F, G>
where
    F: Fn(&Vector) -> f64 + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    pub fn new(dim: usize, value: F, gradient: G) -> Self {
        Self {
            dim,
            value,
            gradient,
        }
    }
}

impl<F, G> ObjectiveOracle for SmoothFn<F, G>
where
    F: Fn(&Vector) -> f64 + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    fn subgradient_argmax(&self, x: &Vector, _direction: &Vector) -> Vector {
        (self.gradient)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizerConfig {
    pub max_iterations: usize,
    /// Stop when `|s| <= step_tol`.
    pub step_tol: f64,
    /// Known optimal value; enables the gap column.
    pub f_star: Option<f64>,
    /// Stop with [`Outcome::TargetReached`] once `f - f_star <= target_gap`.
    pub target_gap: Option<f64>,
    pub record_spectrum: bool,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            step_tol: 1e-12,
            f_star: None,
            target_gap: None,
            record_spectrum: false,
        }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(RescaleError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.step_tol > 0.0) {
            return Err(RescaleError::InvalidConfig("step_tol must be > 0".into()));
        }
        if self.target_gap.is_some() && self.f_star.is_none() {
            return Err(RescaleError::InvalidConfig("target_gap needs f_star".into()));
        }
        Ok(())
    }
}

fn spectrum_fields(row: &mut TraceRow, h: &SpdMatrix, enabled: bool) {
    if enabled {
        let (lo, hi) = h.eigen_extremes();
        row.det_h = Some(h.determinant());
        row.lambda_min = Some(lo);
        row.lambda_max = Some(hi);
    }
}

/// Linesearch-free BFGS: take the unit step `s = -H g`, always apply the
/// nonsmooth unit-step update with `g_+` maximizing `<., s>` over
/// `∂f(x + s)`, and move to `x + s` only if `f(x + s) < f(x)`. A rejected
/// step refreshes `g` to the maximizer of `<., s>` over `∂f(x)`.
///
/// Row `k` holds the state before iteration `k` and whether that
/// iteration's step was accepted.
pub fn linesearch_free_bfgs<F: ObjectiveOracle + ?Sized>(
    f: &F,
    x0: &Vector,
    h0: &SpdMatrix,
    cfg: &MinimizerConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    check_dim(f.dim(), x0.len())?;
    check_dim(f.dim(), h0.dim())?;
    let mut trace = TraceBuilder::new("lf_bfgs");
    let mut x = x0.clone();
    let mut fx = f.eval(&x);
    let mut g = f.subgradient_argmax(&x, &Vector::zeros(x.len()));
    let mut h = h0.clone();
    let mut outcome = Outcome::MaxIterations;
    let mut updates = 0;
    for k in 0..=cfg.max_iterations {
        let gap = cfg.f_star.map(|fs| fx - fs);
        let s = -h.mul_vec(&g);
        let mut row = TraceRow {
            k,
            step_norm: s.norm(),
            objective: Some(fx),
            gap,
            ..Default::default()
        };
        spectrum_fields(&mut row, &h, cfg.record_spectrum);
        if let (Some(gap), Some(target)) = (gap, cfg.target_gap) {
            if gap <= target {
                trace.push(row);
                outcome = Outcome::TargetReached;
                break;
            }
        }
        if row.step_norm <= cfg.step_tol {
            trace.push(row);
            outcome = Outcome::StepVanished;
            break;
        }
        if k == cfg.max_iterations {
            trace.push(row);
            break;
        }
        let x_plus = &x + &s;
        let f_plus = f.eval(&x_plus);
        let g_plus = f.subgradient_argmax(&x_plus, &s);
        let accepted = f_plus < fx;
        row.accepted = Some(accepted);
        row.statistic = Some(f_plus - fx);
        trace.push(row);
        let y = &g_plus - &g;
        match bfgs_update_with_step(&h, &s, &y) {
            Ok(next) => h = next,
            Err(err) if err.is_curvature() => {
                outcome = Outcome::CurvatureFailure;
                break;
            }
            Err(err) => return Err(err),
        }
        updates += 1;
        if accepted {
            x = x_plus;
            fx = f_plus;
            g = g_plus;
        } else {
            g = f.subgradient_argmax(&x, &s);
        }
    }
    let mut run = trace.finish(outcome, updates);
    run.final_point = Some(x.iter().copied().collect());
    Ok(run)
}

/// Repeat the (nonsmooth) unit-step BFGS update at the fixed point `x` while
/// `f(x - H g) >= f(x)`. Returns the final metric with the trace.
fn fixed_point_loop<F: ObjectiveOracle + ?Sized>(
    name: &'static str,
    f: &F,
    x: &Vector,
    g0: &Vector,
    h0: &SpdMatrix,
    cfg: &MinimizerConfig,
) -> Result<(SpdMatrix, RunTrace)> {
    cfg.validate()?;
    check_dim(f.dim(), x.len())?;
    check_dim(f.dim(), g0.len())?;
    check_dim(f.dim(), h0.dim())?;
    let fx = f.eval(x);
    let mut trace = TraceBuilder::new(name);
    let mut g = g0.clone();
    let mut h = h0.clone();
    let mut outcome = Outcome::MaxIterations;
    let mut updates = 0;
    for k in 0..=cfg.max_iterations {
        let s = -h.mul_vec(&g);
        let mut row = TraceRow {
            k,
            step_norm: s.norm(),
            objective: Some(fx),
            ..Default::default()
        };
        spectrum_fields(&mut row, &h, cfg.record_spectrum);
        if row.step_norm <= cfg.step_tol {
            trace.push(row);
            outcome = Outcome::StepVanished;
            break;
        }
        let x_plus = x + &s;
        let f_plus = f.eval(&x_plus);
        row.statistic = Some(f_plus - fx);
        trace.push(row);
        if f_plus < fx {
            outcome = Outcome::DescentFound { step: s };
            break;
        }
        if k == cfg.max_iterations {
            break;
        }
        let g_plus = f.subgradient_argmax(&x_plus, &s);
        let y = &g_plus - &g;
        match bfgs_update_with_step(&h, &s, &y) {
            Ok(next) => h = next,
            Err(err) if err.is_curvature() => {
                outcome = Outcome::CurvatureFailure;
                break;
            }
            Err(err) => return Err(err),
        }
        updates += 1;
        g = f.subgradient_argmax(x, &s);
    }
    let mut run = trace.finish(outcome, updates);
    run.final_point = Some(x.iter().copied().collect());
    Ok((h, run))
}

/// BFGS updating at a fixed noncritical point of a smooth strictly convex
/// function until `f(x - H g) < f(x)`.
pub fn fixed_point_bfgs_descent<F: ObjectiveOracle + ?Sized>(
    f: &F,
    x: &Vector,
    h0: &SpdMatrix,
    cfg: &MinimizerConfig,
) -> Result<(SpdMatrix, RunTrace)> {
    check_dim(f.dim(), x.len())?;
    let g = f.subgradient_argmax(x, &Vector::zeros(x.len()));
    let gn = g.norm();
    if gn == 0.0 {
        return Err(RescaleError::DegenerateGradient(gn));
    }
    fixed_point_loop("fixed_point", f, x, &g, h0, cfg)
}

/// The nonsmooth fixed-point loop from a given subgradient `g0 ∈ ∂f(x)`.
///
/// Ends with [`Outcome::DescentFound`], [`Outcome::StepVanished`]
/// (`|H g| <= step_tol`), [`Outcome::CurvatureFailure`] (`s^T y` not
/// positive) or [`Outcome::MaxIterations`].
pub fn fixed_point_bfgs_nonsmooth<F: ObjectiveOracle + ?Sized>(
    f: &F,
    x: &Vector,
    g0: &Vector,
    h0: &SpdMatrix,
    cfg: &MinimizerConfig,
) -> Result<RunTrace> {
    fixed_point_loop("fixed_point_nonsmooth", f, x, g0, h0, cfg).map(|(_, run)| run)
}
