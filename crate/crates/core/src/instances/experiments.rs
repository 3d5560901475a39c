//! The experiment harness: one routine per figure.
//!
//! Each experiment returns an [`ExperimentResult`] holding a data table (the
//! plotted quantities, written as `figN.csv`) and long-format summary
//! records (`figN_summary.csv`, columns `group,algorithm,run,metric,value`;
//! `run` is empty for aggregates). Runs execute in parallel; run `i` uses
//! the seed `base_seed ^ i`, so output does not depend on scheduling.
//! Failed runs are recorded with outcome `error`, never dropped.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{
    autocorrelation, dominant_period, first_gap_below, flat_segments, log_gap_fit, loglog_fit,
    mean, median, period_drift,
};
use super::generators::{
    failure_instance, gen_ellipsoid, gen_max_quadratics, gen_simplex, gen_start_point,
    gen_unit_ball_start,
};
use super::optimum::reference_optimum;
use crate::error::{RescaleError, Result};
use crate::linalg::SpdMatrix;
use crate::minimizers::{linesearch_free_bfgs, MinimizerConfig};
use crate::oracles::EllipsoidOracle;
use crate::separators::{
    bfgs_separate, bfgs_separate_hull, ellipsoid_separate, randomized_shor_separate,
    shor_separate, shor_separate_ellipsoid, unit_ball_iteration, SeparatorConfig,
};
use crate::trace::{fmt_f64, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Figure {
    pub const ALL: [Figure; 8] = [
        Figure::Fig1,
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
        }
    }

    pub fn default_runs(self) -> usize {
        match self {
            Figure::Fig1 => 20,
            Figure::Fig2 => 20,
            Figure::Fig3 | Figure::Fig5 => 1,
            Figure::Fig4 | Figure::Fig6 => 100,
            Figure::Fig7 => 1000,
            Figure::Fig8 => 200,
        }
    }

    pub fn default_max_iterations(self) -> usize {
        match self {
            Figure::Fig1 => 2000,
            Figure::Fig5 => 1000,
            Figure::Fig8 => 100_000,
            _ => 10_000,
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = RescaleError;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|fig| fig.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| RescaleError::InvalidConfig(format!("unknown figure {s:?}")))
    }
}

/// Simplex parameters swept by `fig2`: `10^-1, 10^-1.5, ..., 10^-3`.
pub const DEFAULT_EPS_GRID: [f64; 5] = [1e-1, 0.031622776601683794, 1e-2, 0.0031622776601683794, 1e-3];
/// Dimensions swept by `fig8`.
pub const DEFAULT_DIMS: [usize; 6] = [2, 4, 8, 16, 32, 64];
/// Simplex parameter of the `fig3` trajectories.
pub const FIG3_EPS: f64 = 1e-2;
/// Offsets `d` of the ellipsoid histograms.
pub const ELLIPSOID_OFFSETS: [f64; 2] = [1.0, 0.1];
/// Gap recorded as "reached" in `fig1`.
pub const FIG1_GAP: f64 = 1e-6;
/// Relative step reduction that ends a unit-ball run in `fig7` and `fig8`.
pub const UNIT_BALL_REDUCTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Runs per group; the figure's default when `None`.
    pub runs: Option<usize>,
    pub seed: u64,
    /// Iteration cap per run; the figure's default when `None`.
    pub max_iterations: Option<usize>,
    /// Leading iterations ignored by the `fig5` cycle statistics.
    pub burn_in: usize,
    pub eps_grid: Vec<f64>,
    pub dims: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            runs: None,
            seed: 0,
            max_iterations: None,
            burn_in: 20,
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
            dims: DEFAULT_DIMS.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == Some(0) {
            return Err(RescaleError::InvalidConfig("runs must be >= 1".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(RescaleError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(RescaleError::InvalidConfig("eps grid must be positive".into()));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(RescaleError::InvalidConfig("dims must be >= 1".into()));
        }
        Ok(())
    }

    fn runs(&self, figure: Figure) -> usize {
        self.runs.unwrap_or(figure.default_runs())
    }

    fn max_iterations(&self, figure: Figure) -> usize {
        self.max_iterations.unwrap_or(figure.default_max_iterations())
    }
}

/// Seed of run `index` under base seed `base`.
pub fn run_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

/// A header plus string rows, written verbatim as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of column `name`, in row order.
    pub fn values(&self, name: &str) -> Vec<&str> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| r[i].as_str()).collect(),
            None => Vec::new(),
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One summary record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub group: String,
    pub algorithm: String,
    pub run: Option<usize>,
    pub metric: String,
    pub value: String,
}

/// Outcome of one run inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub group: String,
    pub algorithm: String,
    pub run: usize,
    pub seed: u64,
    /// An [`Outcome`](crate::trace::Outcome) label, or `error`.
    pub outcome: String,
    pub iterations: usize,
    pub final_statistic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub figure: Figure,
    pub runs: Vec<RunSummary>,
    pub data: Table,
    pub summary: Vec<SummaryRecord>,
}

impl ExperimentResult {
    /// The aggregate `metric` of `(group, algorithm)` parsed as a number.
    pub fn aggregate(&self, group: &str, algorithm: &str, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.run.is_none() && r.group == group && r.algorithm == algorithm && r.metric == metric)
            .and_then(|r| r.value.parse().ok())
    }

    /// Runs of one `(group, algorithm)` pair.
    pub fn runs_of<'a>(&'a self, group: &'a str, algorithm: &'a str) -> impl Iterator<Item = &'a RunSummary> + 'a {
        self.runs
            .iter()
            .filter(move |r| r.group == group && r.algorithm == algorithm)
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&["group", "algorithm", "run", "metric", "value"]);
        for r in &self.summary {
            t.rows.push(vec![
                r.group.clone(),
                r.algorithm.clone(),
                r.run.map(|x| x.to_string()).unwrap_or_default(),
                r.metric.clone(),
                r.value.clone(),
            ]);
        }
        t
    }

    /// Writes `figN.csv` and `figN_summary.csv` into `dir` (created if
    /// missing) and returns their paths.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let data = dir.join(format!("{}.csv", self.figure));
        let summary = dir.join(format!("{}_summary.csv", self.figure));
        self.data.write(&data)?;
        self.summary_table().write(&summary)?;
        Ok(vec![data, summary])
    }
}

struct Job<T> {
    group: String,
    algorithm: &'static str,
    run: usize,
    seed: u64,
    params: T,
}

struct Finished<T> {
    summary: RunSummary,
    trace: Option<RunTrace>,
    params: T,
}

fn execute<T: Send + Sync, F>(jobs: Vec<Job<T>>, work: F) -> Vec<Finished<T>>
where
    F: Fn(&Job<T>) -> Result<RunTrace> + Sync,
{
    jobs.into_par_iter()
        .map(|job| {
            let result = work(&job);
            let (outcome, iterations, final_statistic, error, trace) = match result {
                Ok(trace) => (
                    trace.outcome.label().to_string(),
                    trace.updates,
                    trace.rows.last().and_then(|r| r.statistic),
                    None,
                    Some(trace),
                ),
                Err(err) => ("error".to_string(), 0, None, Some(err.to_string()), None),
            };
            Finished {
                summary: RunSummary {
                    group: job.group,
                    algorithm: job.algorithm.to_string(),
                    run: job.run,
                    seed: job.seed,
                    outcome,
                    iterations,
                    final_statistic,
                    error,
                },
                trace,
                params: job.params,
            }
        })
        .collect()
}

fn num(x: f64) -> String {
    fmt_f64(x)
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn record(group: &str, algorithm: &str, run: Option<usize>, metric: &str, value: String) -> SummaryRecord {
    SummaryRecord {
        group: group.to_string(),
        algorithm: algorithm.to_string(),
        run,
        metric: metric.to_string(),
        value,
    }
}

fn per_run_records<T>(finished: &[Finished<T>]) -> Vec<SummaryRecord> {
    let mut out = Vec::new();
    for f in finished {
        let s = &f.summary;
        out.push(record(&s.group, &s.algorithm, Some(s.run), "seed", s.seed.to_string()));
        out.push(record(&s.group, &s.algorithm, Some(s.run), "outcome", s.outcome.clone()));
        out.push(record(&s.group, &s.algorithm, Some(s.run), "iterations", s.iterations.to_string()));
        if let Some(err) = &s.error {
            out.push(record(&s.group, &s.algorithm, Some(s.run), "error", err.clone()));
        }
    }
    out
}

/// `runs`, `mean_iterations`, `median_iterations`, `max_iterations` and
/// `failures` (outcome other than `success`) per `(group, algorithm)`, in
/// first-appearance order.
fn aggregates<T>(finished: &[Finished<T>], success: &str) -> Vec<SummaryRecord> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for f in finished {
        let key = (f.summary.group.clone(), f.summary.algorithm.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = Vec::new();
    for (group, algorithm) in keys {
        let runs: Vec<&RunSummary> = finished
            .iter()
            .map(|f| &f.summary)
            .filter(|s| s.group == group && s.algorithm == algorithm)
            .collect();
        let iters: Vec<f64> = runs.iter().map(|s| s.iterations as f64).collect();
        let failures = runs.iter().filter(|s| s.outcome != success).count();
        let max = runs.iter().map(|s| s.iterations).max().unwrap_or(0);
        out.push(record(&group, &algorithm, None, "runs", runs.len().to_string()));
        out.push(record(&group, &algorithm, None, "mean_iterations", num(mean(&iters))));
        out.push(record(&group, &algorithm, None, "median_iterations", num(median(&iters))));
        out.push(record(&group, &algorithm, None, "max_iterations", max.to_string()));
        out.push(record(&group, &algorithm, None, "failures", failures.to_string()));
    }
    out
}

fn separator_config(max_iterations: usize) -> SeparatorConfig {
    SeparatorConfig::default()
        .with_max_iterations(max_iterations)
        .without_spectrum()
}

/// Runs one figure's experiment.
pub fn run_experiment(figure: Figure, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (runs, data, summary) = match figure {
        Figure::Fig1 => fig1(cfg),
        Figure::Fig2 => fig2(cfg),
        Figure::Fig3 => fig3(cfg),
        Figure::Fig4 => ellipsoid_histograms(Figure::Fig4, cfg),
        Figure::Fig5 => fig5(cfg),
        Figure::Fig6 => ellipsoid_histograms(Figure::Fig6, cfg),
        Figure::Fig7 => fig7(cfg),
        Figure::Fig8 => fig8(cfg),
    }?;
    Ok(ExperimentResult {
        figure,
        runs,
        data,
        summary,
    })
}

type Parts = (Vec<RunSummary>, Table, Vec<SummaryRecord>);

fn summaries<T>(finished: &[Finished<T>]) -> Vec<RunSummary> {
    finished.iter().map(|f| f.summary.clone()).collect()
}

/// Linesearch-free BFGS on seeded max-of-4-quadratics instances in `R^5`.
fn fig1(cfg: &ExperimentConfig) -> Result<Parts> {
    let max_iterations = cfg.max_iterations(Figure::Fig1);
    let jobs = (0..cfg.runs(Figure::Fig1))
        .map(|run| Job {
            group: String::new(),
            algorithm: "lf_bfgs",
            run,
            seed: run_seed(cfg.seed, run),
            params: (),
        })
        .collect();
    let finished = execute(jobs, |job| {
        let f = gen_max_quadratics(5, 4, job.seed)?;
        let optimum = reference_optimum(&f)?;
        let x0 = gen_start_point(5, job.seed);
        let mcfg = MinimizerConfig {
            max_iterations,
            f_star: Some(optimum.f_star),
            target_gap: Some(FIG1_GAP * 1e-2),
            ..Default::default()
        };
        linesearch_free_bfgs(&f, &x0, &SpdMatrix::identity(5), &mcfg)
    });
    let mut data = Table::new(&["run", "seed", "k", "objective", "gap", "step_norm", "accepted"]);
    let mut summary = per_run_records(&finished);
    let mut reached = 0;
    for f in &finished {
        let s = &f.summary;
        let Some(trace) = &f.trace else { continue };
        for row in &trace.rows {
            data.rows.push(vec![
                s.run.to_string(),
                s.seed.to_string(),
                row.k.to_string(),
                opt_num(row.objective),
                opt_num(row.gap),
                num(row.step_norm),
                row.accepted.map(|a| (a as u8).to_string()).unwrap_or_default(),
            ]);
        }
        let hit = first_gap_below(trace, FIG1_GAP);
        reached += hit.is_some() as usize;
        let fit = log_gap_fit(trace, Some(FIG1_GAP));
        let run = Some(s.run);
        summary.push(record("", "lf_bfgs", run, "first_k_gap_1e-6", hit.map(|k| k.to_string()).unwrap_or_default()));
        summary.push(record("", "lf_bfgs", run, "flat_segments", flat_segments(trace).to_string()));
        summary.push(record("", "lf_bfgs", run, "fit_slope", opt_num(fit.map(|f| f.slope))));
        summary.push(record("", "lf_bfgs", run, "fit_r_squared", opt_num(fit.map(|f| f.r_squared))));
    }
    summary.push(record("", "lf_bfgs", None, "runs", finished.len().to_string()));
    summary.push(record("", "lf_bfgs", None, "reached_gap_1e-6", reached.to_string()));
    Ok((summaries(&finished), data, summary))
}

/// Iterations to separate the simplex family from every start, over the
/// `eps` grid, for four methods.
fn fig2(cfg: &ExperimentConfig) -> Result<Parts> {
    let max_iterations = cfg.max_iterations(Figure::Fig2);
    let randomized_runs = cfg.runs(Figure::Fig2);
    let mut jobs = Vec::new();
    for &eps in &cfg.eps_grid {
        let group = format!("eps={}", fmt_f64(eps));
        for start in 0..6 {
            for algorithm in ["shor", "bfgs"] {
                jobs.push(Job {
                    group: group.clone(),
                    algorithm,
                    run: start,
                    seed: 0,
                    params: (eps, Some(start)),
                });
            }
        }
        for run in 0..randomized_runs {
            jobs.push(Job {
                group: group.clone(),
                algorithm: "shor_randomized",
                run,
                seed: run_seed(cfg.seed, run),
                params: (eps, None),
            });
        }
        jobs.push(Job {
            group: group.clone(),
            algorithm: "ellipsoid",
            run: 0,
            seed: 0,
            params: (eps, None),
        });
    }
    let finished = execute(jobs, |job| {
        let (eps, start) = job.params;
        let set = gen_simplex(eps)?;
        let scfg = separator_config(max_iterations).with_seed(job.seed);
        match job.algorithm {
            "shor" => shor_separate(&set, &set.points()[start.unwrap_or(0)], &scfg),
            "bfgs" => bfgs_separate_hull(&set, start.unwrap_or(0), &SpdMatrix::identity(5), &scfg),
            "shor_randomized" => randomized_shor_separate(&set, &scfg),
            _ => ellipsoid_separate(&set, &scfg),
        }
    });
    let mut data = Table::new(&["eps", "algorithm", "run", "start", "seed", "outcome", "iterations"]);
    for f in &finished {
        let s = &f.summary;
        let (eps, start) = f.params;
        data.rows.push(vec![
            num(eps),
            s.algorithm.clone(),
            s.run.to_string(),
            start.map(|x| x.to_string()).unwrap_or_default(),
            s.seed.to_string(),
            s.outcome.clone(),
            s.iterations.to_string(),
        ]);
    }
    let mut summary = aggregates(&finished, "separated");
    summary.extend(per_run_records(&finished));
    Ok((summaries(&finished), data, summary))
}

/// Trajectories (first two coordinates) of Shor's `h` and the BFGS `g` on
/// the simplex family with `eps = 10^-2`, from every start.
fn fig3(cfg: &ExperimentConfig) -> Result<Parts> {
    let max_iterations = cfg.max_iterations(Figure::Fig3);
    let mut jobs = Vec::new();
    for start in 0..6 {
        for algorithm in ["shor", "bfgs"] {
            jobs.push(Job {
                group: format!("eps={}", fmt_f64(FIG3_EPS)),
                algorithm,
                run: start,
                seed: 0,
                params: start,
            });
        }
    }
    let finished = execute(jobs, |job| {
        let set = gen_simplex(FIG3_EPS)?;
        let mut scfg = separator_config(max_iterations);
        scfg.record_projection = true;
        match job.algorithm {
            "shor" => shor_separate(&set, &set.points()[job.params], &scfg),
            _ => bfgs_separate_hull(&set, job.params, &SpdMatrix::identity(5), &scfg),
        }
    });
    let mut data = Table::new(&["eps", "algorithm", "start", "k", "proj_x", "proj_y"]);
    for f in &finished {
        let Some(trace) = &f.trace else { continue };
        for row in &trace.rows {
            let (x, y) = row.projection.unwrap_or((f64::NAN, f64::NAN));
            data.rows.push(vec![
                num(FIG3_EPS),
                f.summary.algorithm.clone(),
                f.params.to_string(),
                row.k.to_string(),
                num(x),
                num(y),
            ]);
        }
    }
    let mut summary = aggregates(&finished, "separated");
    summary.extend(per_run_records(&finished));
    Ok((summaries(&finished), data, summary))
}

/// Iteration histograms for separating a point from `diag(1, ..., 10^4) B`
/// with `d` in {1, 0.1}: Shor and randomized Shor (`fig4`) or BFGS (`fig6`).
fn ellipsoid_histograms(figure: Figure, cfg: &ExperimentConfig) -> Result<Parts> {
    let max_iterations = cfg.max_iterations(figure);
    let algorithms: &[&'static str] = match figure {
        Figure::Fig4 => &["shor_ellipsoid", "shor_randomized"],
        _ => &["bfgs_ellipsoid"],
    };
    let mut jobs = Vec::new();
    for &d in &ELLIPSOID_OFFSETS {
        for &algorithm in algorithms {
            for run in 0..cfg.runs(figure) {
                jobs.push(Job {
                    group: format!("d={}", fmt_f64(d)),
                    algorithm,
                    run,
                    seed: run_seed(cfg.seed, run),
                    params: d,
                });
            }
        }
    }
    let finished = execute(jobs, |job| {
        let inst = gen_ellipsoid(&[0, 1, 2, 3, 4], job.params, job.seed)?;
        let scfg = separator_config(max_iterations).with_seed(job.seed);
        match job.algorithm {
            "shor_ellipsoid" => shor_separate_ellipsoid(&inst.a, &inst.c, &inst.start, &scfg),
            "shor_randomized" => {
                randomized_shor_separate(&EllipsoidOracle::new(inst.a.clone(), inst.c.clone())?, &scfg)
            }
            _ => {
                let oracle = EllipsoidOracle::new(inst.a.clone(), inst.c.clone())?;
                let g0 = &inst.a * &inst.start - &inst.c;
                bfgs_separate(&oracle, &g0, &SpdMatrix::identity(g0.len()), &scfg)
            }
        }
    });
    let mut data = Table::new(&["d", "algorithm", "run", "seed", "outcome", "iterations"]);
    for f in &finished {
        let s = &f.summary;
        data.rows.push(vec![
            num(f.params),
            s.algorithm.clone(),
            s.run.to_string(),
            s.seed.to_string(),
            s.outcome.clone(),
            s.iterations.to_string(),
        ]);
    }
    let mut summary = aggregates(&finished, "separated");
    summary.extend(per_run_records(&finished));
    Ok((summaries(&finished), data, summary))
}

/// The cosine between `p` and `h` along Shor updating on the failure
/// instance, with cycle statistics after the burn-in.
fn fig5(cfg: &ExperimentConfig) -> Result<Parts> {
    let max_iterations = cfg.max_iterations(Figure::Fig5);
    let inst = failure_instance();
    let scfg = separator_config(max_iterations);
    let trace = shor_separate_ellipsoid(&inst.a, &inst.c, &inst.start, &scfg)?;
    let mut data = Table::new(&["k", "cosine", "statistic", "step_norm"]);
    for row in &trace.rows {
        data.rows.push(vec![
            row.k.to_string(),
            opt_num(row.cosine),
            opt_num(row.statistic),
            num(row.step_norm),
        ]);
    }
    let cosines = trace.cosines();
    let tail = &cosines[cfg.burn_in.min(cosines.len())..];
    let max_tail = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let last = &tail[tail.len().saturating_sub(100)..];
    let alg = "shor_ellipsoid";
    let summary = vec![
        record("", alg, None, "outcome", trace.outcome.label().to_string()),
        record("", alg, None, "iterations", trace.updates.to_string()),
        record("", alg, None, "burn_in", cfg.burn_in.to_string()),
        record("", alg, None, "max_cosine_after_burn_in", num(max_tail)),
        record("", alg, None, "lag5_autocorrelation", num(autocorrelation(tail, 5))),
        record(
            "",
            alg,
            None,
            "dominant_period",
            dominant_period(tail, 12).map(|p| p.to_string()).unwrap_or_default(),
        ),
        record("", alg, None, "period5_drift_last_100", num(period_drift(last, 5))),
    ];
    let run = RunSummary {
        group: String::new(),
        algorithm: alg.to_string(),
        run: 0,
        seed: 0,
        outcome: trace.outcome.label().to_string(),
        iterations: trace.updates,
        final_statistic: trace.rows.last().and_then(|r| r.statistic),
        error: None,
    };
    Ok((vec![run], data, summary))
}

fn unit_ball_jobs(n: usize, runs: usize, base: u64) -> Vec<Job<usize>> {
    (0..runs)
        .map(|run| Job {
            group: format!("n={n}"),
            algorithm: "unit_ball",
            run,
            seed: run_seed(base, run),
            params: n,
        })
        .collect()
}

fn unit_ball_run(job: &Job<usize>, max_iterations: usize) -> Result<RunTrace> {
    let (g0, h0) = gen_unit_ball_start(job.params, job.seed)?;
    let scfg = separator_config(max_iterations).with_step_tol(UNIT_BALL_REDUCTION);
    unit_ball_iteration(&g0, &h0, &scfg)
}

/// `|s|` along the unit-ball iteration in `R^5` from random starts.
fn fig7(cfg: &ExperimentConfig) -> Result<Parts> {
    let max_iterations = cfg.max_iterations(Figure::Fig7);
    let jobs = unit_ball_jobs(5, cfg.runs(Figure::Fig7), cfg.seed);
    let finished = execute(jobs, |job| unit_ball_run(job, max_iterations));
    let mut data = Table::new(&["run", "seed", "k", "step_norm", "relative_step"]);
    for f in &finished {
        let Some(trace) = &f.trace else { continue };
        let s0 = trace.rows.first().map(|r| r.step_norm).unwrap_or(1.0);
        for row in &trace.rows {
            data.rows.push(vec![
                f.summary.run.to_string(),
                f.summary.seed.to_string(),
                row.k.to_string(),
                num(row.step_norm),
                num(row.step_norm / s0),
            ]);
        }
    }
    let mut summary = aggregates(&finished, "step_vanished");
    summary.extend(per_run_records(&finished));
    Ok((summaries(&finished), data, summary))
}

/// Mean iterations of the unit-ball iteration to reduce `|s|` by `10^-8`,
/// against dimension, with a log-log fit.
///
/// `fig8.csv` columns: `kind,n,run,seed,outcome,iterations,value`. Rows of
/// kind `run` carry one run each, `mean` rows the per-dimension mean in
/// `value`, and the final `slope`, `intercept` and `r_squared` rows the fit.
fn fig8(cfg: &ExperimentConfig) -> Result<Parts> {
    let max_iterations = cfg.max_iterations(Figure::Fig8);
    let runs = cfg.runs(Figure::Fig8);
    let jobs = cfg
        .dims
        .iter()
        .flat_map(|&n| unit_ball_jobs(n, runs, cfg.seed))
        .collect();
    let finished = execute(jobs, |job| unit_ball_run(job, max_iterations));
    let mut data = Table::new(&["kind", "n", "run", "seed", "outcome", "iterations", "value"]);
    for f in &finished {
        let s = &f.summary;
        data.rows.push(vec![
            "run".into(),
            f.params.to_string(),
            s.run.to_string(),
            s.seed.to_string(),
            s.outcome.clone(),
            s.iterations.to_string(),
            String::new(),
        ]);
    }
    let mut means = Vec::new();
    for &n in &cfg.dims {
        let iters: Vec<f64> = finished
            .iter()
            .filter(|f| f.params == n)
            .map(|f| f.summary.iterations as f64)
            .collect();
        let m = mean(&iters);
        means.push(m);
        data.rows.push(vec![
            "mean".into(),
            n.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            num(m),
        ]);
    }
    let dims: Vec<f64> = cfg.dims.iter().map(|&n| n as f64).collect();
    let fit = loglog_fit(&dims, &means);
    let mut summary = aggregates(&finished, "step_vanished");
    for (kind, value) in [
        ("slope", fit.map(|f| f.slope)),
        ("intercept", fit.map(|f| f.intercept)),
        ("r_squared", fit.map(|f| f.r_squared)),
    ] {
        data.rows.push(vec![
            kind.into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            opt_num(value),
        ]);
        summary.push(record("", "unit_ball", None, &format!("loglog_{kind}"), opt_num(value)));
    }
    summary.extend(per_run_records(&finished));
    Ok((summaries(&finished), data, summary))
}
