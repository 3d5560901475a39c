//! Post-hoc trace statistics.

use serde::{Deserialize, Serialize};

use crate::trace::RunTrace;

/// Sample autocorrelation at `lag`, mean removed, normalized by the total
/// sum of squares. Zero for constant or too-short series.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    if lag >= xs.len() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let total: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let cross: f64 = xs
        .iter()
        .zip(&xs[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    cross / total
}

/// The lag in `2..=max_lag` with the largest autocorrelation (smallest lag on
/// ties).
pub fn dominant_period(xs: &[f64], max_lag: usize) -> Option<usize> {
    (2..=max_lag.min(xs.len().saturating_sub(1)))
        .map(|lag| (lag, autocorrelation(xs, lag)))
        .fold(None, |best: Option<(usize, f64)>, (lag, r)| match best {
            Some((_, br)) if br >= r => best,
            _ => Some((lag, r)),
        })
        .map(|(lag, _)| lag)
}

/// Mean of `|x[t + period] - x[t]|`: how far the series moves per period.
pub fn period_drift(xs: &[f64], period: usize) -> f64 {
    if period == 0 || period >= xs.len() {
        return f64::NAN;
    }
    let diffs: Vec<f64> = xs.iter().zip(&xs[period..]).map(|(a, b)| (b - a).abs()).collect();
    diffs.iter().sum::<f64>() / diffs.len() as f64
}

/// Ordinary least squares `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys).take(n) {
        sxx += (x - mx).powi(2);
        sxy += (x - mx) * (y - my);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: n,
    })
}

/// Fit of `ln(gap)` against `k` over every row up to and including the first
/// one with gap at or below `until` (the whole trace when `None`). Rows
/// without a positive gap are skipped.
pub fn log_gap_fit(trace: &RunTrace, until: Option<f64>) -> Option<LinearFit> {
    let mut ks = Vec::new();
    let mut logs = Vec::new();
    for row in &trace.rows {
        let Some(gap) = row.gap else { continue };
        if gap > 0.0 {
            ks.push(row.k as f64);
            logs.push(gap.ln());
        }
        if until.is_some_and(|t| gap <= t) {
            break;
        }
    }
    linear_fit(&ks, &logs)
}

/// Number of maximal runs of consecutive rejected steps.
pub fn flat_segments(trace: &RunTrace) -> usize {
    let mut count = 0;
    let mut inside = false;
    for row in &trace.rows {
        let rejected = row.accepted == Some(false);
        if rejected && !inside {
            count += 1;
        }
        inside = rejected;
    }
    count
}

/// First `k` whose gap is at or below `target`.
pub fn first_gap_below(trace: &RunTrace, target: f64) -> Option<usize> {
    trace
        .rows
        .iter()
        .find(|r| r.gap.is_some_and(|g| g <= target))
        .map(|r| r.k)
}

/// Slope of `ln(y)` against `ln(x)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Outcome, TraceRow};

    #[test]
    fn periodic_series_peaks_at_its_period() {
        let xs: Vec<f64> = (0..200).map(|t| [0.3, -0.8, 0.1, 0.5, -0.2][t % 5]).collect();
        assert!((autocorrelation(&xs, 5) - 1.0).abs() < 0.03);
        assert_eq!(dominant_period(&xs, 12), Some(5));
        assert_eq!(period_drift(&xs, 5), 0.0);
    }

    #[test]
    fn fit_of_an_exact_line() {
        let fit = linear_fit(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-15 && (fit.intercept - 1.0).abs() < 1e-15);
        assert!((fit.r_squared - 1.0).abs() < 1e-15);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        let power = loglog_fit(&[2.0, 4.0, 8.0], &[3.0, 6.0, 12.0]).unwrap();
        assert!((power.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_segments_count_rejection_runs() {
        let flags = [true, false, false, true, false, true, true];
        let rows = flags
            .iter()
            .enumerate()
            .map(|(k, &a)| TraceRow {
                k,
                accepted: Some(a),
                gap: Some(2f64.powi(-(k as i32))),
                ..Default::default()
            })
            .collect();
        let trace = RunTrace {
            algorithm: "t".into(),
            rows,
            outcome: Outcome::MaxIterations,
            updates: 7,
            final_point: None,
            wall_time: Default::default(),
        };
        assert_eq!(flat_segments(&trace), 2);
        let fit = log_gap_fit(&trace, None).unwrap();
        assert!((fit.slope + std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(log_gap_fit(&trace, Some(0.2)).unwrap().points, 4);
        assert_eq!(first_gap_below(&trace, 0.2), Some(3));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
