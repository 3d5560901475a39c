//! Run traces: one row per iteration plus the terminal outcome.

use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{vec_serde, Vector};

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    /// `normal` is a direction `d` with `<q, d> < 0` for every point `q` of
    /// the set.
    Separated {
        #[serde(with = "vec_serde")]
        normal: Vector,
    },
    MembershipCertified,
    StepVanished,
    MaxIterations,
    CurvatureFailure,
    /// A fixed-point loop found a step with `f(x + step) < f(x)`.
    DescentFound {
        #[serde(with = "vec_serde")]
        step: Vector,
    },
    /// A minimizer reached the requested optimality gap.
    TargetReached,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Separated { .. } => "separated",
            Outcome::MembershipCertified => "membership_certified",
            Outcome::StepVanished => "step_vanished",
            Outcome::MaxIterations => "max_iterations",
            Outcome::CurvatureFailure => "curvature_failure",
            Outcome::DescentFound { .. } => "descent_found",
            Outcome::TargetReached => "target_reached",
        }
    }

    pub fn is_separated(&self) -> bool {
        matches!(self, Outcome::Separated { .. })
    }

    pub fn normal(&self) -> Option<&Vector> {
        match self {
            Outcome::Separated { normal } => Some(normal),
            _ => None,
        }
    }
}

/// One iteration's record. Columns an algorithm does not produce stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    /// `|s|` for BFGS-type methods, `|h|` for Shor-type methods.
    pub step_norm: f64,
    /// The quantity tested for termination (`p^T h`, `g_+^T s`, `c^T d`, ...).
    pub statistic: Option<f64>,
    pub cosine: Option<f64>,
    pub det_h: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lambda_min: Option<f64>,
    pub gamma: Option<f64>,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    pub accepted: Option<bool>,
    pub projection: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub rows: Vec<TraceRow>,
    pub outcome: Outcome,
    /// Number of metric (or set) updates performed before stopping.
    pub updates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_point: Option<Vec<f64>>,
    /// Excluded from serialized output so files stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

pub const TRACE_HEADER: [&str; 13] = [
    "k",
    "step_norm",
    "statistic",
    "cosine",
    "det_h",
    "lambda_max",
    "lambda_min",
    "gamma",
    "objective",
    "gap",
    "accepted",
    "proj_x",
    "proj_y",
];

/// 17 significant digits, the shortest width that round-trips every f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl TraceRow {
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            fmt_f64(self.step_norm),
            opt(self.statistic),
            opt(self.cosine),
            opt(self.det_h),
            opt(self.lambda_max),
            opt(self.lambda_min),
            opt(self.gamma),
            opt(self.objective),
            opt(self.gap),
            self.accepted.map(|a| (a as u8).to_string()).unwrap_or_default(),
            opt(self.projection.map(|p| p.0)),
            opt(self.projection.map(|p| p.1)),
        ]
    }
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.updates
    }

    pub fn step_norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.step_norm).collect()
    }

    pub fn cosines(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.cosine).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        for row in &self.rows {
            w.write_record(row.csv_fields())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let trace = RunTrace {
            algorithm: "demo".into(),
            rows: vec![
                TraceRow {
                    k: 0,
                    step_norm: 1.0,
                    cosine: Some(-0.5),
                    ..Default::default()
                },
                TraceRow {
                    k: 1,
                    step_norm: 0.25,
                    accepted: Some(true),
                    ..Default::default()
                },
            ],
            outcome: Outcome::MaxIterations,
            updates: 1,
            final_point: None,
            wall_time: Duration::from_millis(3),
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("k,step_norm,statistic,cosine"));
        assert_eq!(
            lines[1],
            "0,1.0000000000000000e0,,-5.0000000000000000e-1,,,,,,,,,"
        );
        assert!(lines[2].contains(",1,"));
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn outcome_json_is_tagged() {
        let o = Outcome::Separated {
            normal: Vector::from_vec(vec![1.0, -2.0]),
        };
        let text = serde_json::to_string(&o).unwrap();
        assert_eq!(text, r#"{"kind":"separated","normal":[1.0,-2.0]}"#);
        let back: Outcome = serde_json::from_str(&text).unwrap();
        assert_eq!(back, o);
    }
}
