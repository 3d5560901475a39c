//! `rescale`: run separators, minimizers and figure experiments from the shell.
//!
//! Exit codes: 0 when a run ends with a certificate or reaches its target,
//! 2 at the iteration cap, 3 on a curvature failure, 64 on usage errors and
//! 1 on any other error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rescale::instances::{
    gen_start_point, reference_optimum, run_experiment, ExperimentConfig, Figure, Instance,
    InstanceSpec,
};
use rescale::minimizers::{
    fixed_point_bfgs_descent, fixed_point_bfgs_nonsmooth, linesearch_free_bfgs, MinimizerConfig,
    ObjectiveOracle, SupportFunction,
};
use rescale::oracles::{BallOracle, EllipsoidOracle, FiniteSetOracle};
use rescale::separators::{
    bfgs_separate, bfgs_separate_hull, cholesky_bfgs_separate, ellipsoid_separate,
    randomized_shor_separate, segment_separate, shor_separate, shor_separate_ellipsoid,
    unit_ball_iteration, SeparatorConfig,
};
use rescale::{Outcome, RescaleError, RunTrace, SpdMatrix, Vector};

const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "rescale", version, about = "Metric rescaling for nonsmooth convex separation and minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether 0 lies in a convex set and write the iteration trace.
    Separate(SeparateArgs),
    /// Run a linesearch-free BFGS loop on an objective and write the trace.
    Minimize(MinimizeArgs),
    /// Run a figure experiment, write its CSV files and print the summary.
    Experiment(ExperimentArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Algo {
    Shor,
    ShorRand,
    Bfgs,
    BfgsChol,
    Ellipsoid,
    Segment,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    LfBfgs,
    FixedPoint,
    FixedPointNonsmooth,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct TraceOutput {
    /// Trace file; standard output when omitted
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Trace format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct SeparateArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    /// Instance as `family:key=value,...`, inline JSON, or `@file.json`
    #[arg(long)]
    instance: String,
    /// Seed of the randomized separator's direction stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap on the number of updates
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Vanishing-step tolerance
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Shor dilation constant
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Index of the starting point for point-set instances
    #[arg(long, default_value_t = 0)]
    start: usize,
    #[command(flatten)]
    output: TraceOutput,
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Instance as `family:key=value,...`, inline JSON, or `@file.json`
    #[arg(long)]
    instance: String,
    /// Optimal value: `auto` computes it, a number uses it as given; no gap
    /// column when omitted
    #[arg(long, value_name = "auto|VALUE")]
    fstar: Option<String>,
    /// Starting point as comma-separated coordinates; a standard normal
    /// point drawn from the instance seed when omitted
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// Cap on the number of updates
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Target gap f - f*; used when f* is known
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Vanishing-step tolerance
    #[arg(long, default_value_t = 1e-12)]
    step_tol: f64,
    #[command(flatten)]
    output: TraceOutput,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// fig1 .. fig8
    #[arg(long)]
    figure: Figure,
    /// Runs per group; the figure's default when omitted
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run i uses seed ^ i
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration cap per run; the figure's default when omitted
    #[arg(long)]
    max_iter: Option<usize>,
    /// Leading iterations ignored by the fig5 cycle statistics
    #[arg(long, default_value_t = 20)]
    burn_in: usize,
    /// Output directory
    #[arg(long, env = "RESCALE_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(RescaleError),
    Io(io::Error),
}

impl From<RescaleError> for CliError {
    fn from(e: RescaleError) -> Self {
        match e {
            RescaleError::InvalidConfig(m) | RescaleError::InvalidInstance(m) => CliError::Usage(m),
            other => CliError::Run(other),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_instance(source: &str) -> Result<InstanceSpec, CliError> {
    let text = match source.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read instance file {path}: {e}")))?,
        None => source.to_string(),
    };
    Ok(text.parse::<InstanceSpec>()?)
}

fn unsupported(what: &str, instance: &Instance) -> CliError {
    usage(format!("{what} does not apply to a {} instance", instance.kind()))
}

fn separate(args: &SeparateArgs) -> Result<RunTrace, CliError> {
    let spec = load_instance(&args.instance)?;
    let instance = spec.build()?;
    let cfg = SeparatorConfig {
        max_iterations: args.max_iter,
        step_tol: args.tol,
        dilation_beta: args.beta,
        seed: args.seed,
        ..SeparatorConfig::default()
    };
    let algo = args.algo.to_possible_value().unwrap();
    let name = algo.get_name();
    let trace = match (&instance, args.algo) {
        (Instance::Points(set), _) => separate_points(set, args, &cfg)?,
        (Instance::Segment { c, d }, Algo::Segment) => segment_separate(c, d, &cfg)?,
        (Instance::Segment { c, d }, _) => {
            separate_points(&FiniteSetOracle::new(vec![c.clone(), d.clone()])?, args, &cfg)?
        }
        (Instance::Ellipsoid(e), algo) => {
            let oracle = EllipsoidOracle::new(e.a.clone(), e.c.clone())?;
            let h0 = &e.a * &e.start - &e.c;
            match algo {
                Algo::Shor => shor_separate_ellipsoid(&e.a, &e.c, &e.start, &cfg)?,
                Algo::ShorRand => randomized_shor_separate(&oracle, &cfg)?,
                Algo::Bfgs => bfgs_separate(&oracle, &h0, &SpdMatrix::identity(h0.len()), &cfg)?,
                Algo::Ellipsoid => ellipsoid_separate(&oracle, &cfg)?,
                Algo::BfgsChol | Algo::Segment => return Err(unsupported(name, &instance)),
            }
        }
        (Instance::UnitBall { g0, h0 }, algo) => {
            let ball = BallOracle::new(Vector::zeros(g0.len()), 1.0)?;
            match algo {
                Algo::Bfgs => unit_ball_iteration(g0, h0, &cfg)?,
                Algo::Shor => shor_separate(&ball, g0, &cfg)?,
                Algo::ShorRand => randomized_shor_separate(&ball, &cfg)?,
                Algo::Ellipsoid => ellipsoid_separate(&ball, &cfg)?,
                Algo::BfgsChol | Algo::Segment => return Err(unsupported(name, &instance)),
            }
        }
        (Instance::MaxQuadratics(_) | Instance::Quadratic(_), _) => {
            return Err(unsupported(name, &instance))
        }
    };
    Ok(trace)
}

fn separate_points(set: &FiniteSetOracle, args: &SeparateArgs, cfg: &SeparatorConfig) -> Result<RunTrace, CliError> {
    let points = set.points();
    let start = points
        .get(args.start)
        .ok_or_else(|| usage(format!("--start {} is out of range for {} points", args.start, points.len())))?;
    let n = start.len();
    Ok(match args.algo {
        Algo::Shor => shor_separate(set, start, cfg)?,
        Algo::ShorRand => randomized_shor_separate(set, cfg)?,
        Algo::Bfgs => bfgs_separate_hull(set, args.start, &SpdMatrix::identity(n), cfg)?,
        Algo::BfgsChol => cholesky_bfgs_separate(points, args.start, cfg)?,
        Algo::Ellipsoid => ellipsoid_separate(set, cfg)?,
        Algo::Segment => match points {
            [c, d] => segment_separate(c, d, cfg)?,
            _ => return Err(usage("segment needs exactly two points")),
        },
    })
}

fn minimize(args: &MinimizeArgs) -> Result<RunTrace, CliError> {
    let spec = load_instance(&args.instance)?;
    let instance = spec.build()?;
    let support;
    let (f, closed_form_star): (&dyn ObjectiveOracle, Option<f64>) = match &instance {
        Instance::MaxQuadratics(f) => (f, None),
        Instance::Quadratic(f) => (f, Some(0.0)),
        Instance::Points(set) => {
            support = SupportFunction::new(set.clone());
            (&support, None)
        }
        _ => return Err(usage(format!("minimize does not apply to a {} instance", instance.kind()))),
    };
    let n = f.dim();
    let f_star = match args.fstar.as_deref() {
        None => None,
        Some("auto") => Some(match (&instance, closed_form_star) {
            (_, Some(v)) => v,
            (Instance::MaxQuadratics(q), _) => reference_optimum(q)?.f_star,
            _ => return Err(usage(format!("--fstar auto is not available for a {} instance", instance.kind()))),
        }),
        Some(v) => Some(v.parse::<f64>().map_err(|_| usage(format!("--fstar expects `auto` or a number, got `{v}`")))?),
    };
    let x0 = match &args.x {
        Some(x) if x.len() != n => return Err(usage(format!("--x has {} coordinates, the instance has {n}", x.len()))),
        Some(x) => Vector::from_vec(x.clone()),
        None => gen_start_point(n, spec.seed),
    };
    let cfg = MinimizerConfig {
        max_iterations: args.max_iter,
        step_tol: args.step_tol,
        f_star,
        target_gap: f_star.map(|_| args.tol),
        record_spectrum: false,
    };
    cfg.validate()?;
    let h0 = SpdMatrix::identity(n);
    Ok(match args.method {
        Method::LfBfgs => linesearch_free_bfgs(f, &x0, &h0, &cfg)?,
        Method::FixedPoint => fixed_point_bfgs_descent(f, &x0, &h0, &cfg)?.1,
        Method::FixedPointNonsmooth => {
            let g0 = f.subgradient_argmax(&x0, &Vector::zeros(n));
            fixed_point_bfgs_nonsmooth(f, &x0, &g0, &h0, &cfg)?
        }
    })
}

fn write_trace(trace: &RunTrace, output: &TraceOutput) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match &output.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match output.format {
        Format::Csv => trace.write_csv(&mut sink)?,
        Format::Json => {
            trace.write_json(&mut sink)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn outcome_code(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::MaxIterations => 2,
        Outcome::CurvatureFailure => 3,
        _ => 0,
    }
}

fn report(trace: &RunTrace) {
    let mut line = format!("{}: {} after {} updates", trace.algorithm, trace.outcome.label(), trace.updates);
    if let Some(normal) = trace.outcome.normal() {
        let coords: Vec<String> = normal.iter().map(|v| format!("{v:.6e}")).collect();
        line.push_str(&format!(", normal [{}]", coords.join(", ")));
    }
    eprintln!("{line}");
}

fn run_trace_command(trace: Result<RunTrace, CliError>, output: &TraceOutput) -> Result<u8, CliError> {
    let trace = trace?;
    write_trace(&trace, output)?;
    report(&trace);
    Ok(outcome_code(&trace.outcome))
}

fn experiment(args: &ExperimentArgs) -> Result<u8, CliError> {
    let cfg = ExperimentConfig {
        runs: args.runs,
        seed: args.seed,
        max_iterations: args.max_iter,
        burn_in: args.burn_in,
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    let result = run_experiment(args.figure, &cfg)?;
    let files = result.write_csv(&args.out_dir)?;
    print_summary(&result.summary_table().rows)?;
    for path in files {
        eprintln!("wrote {}", display(&path));
    }
    Ok(0)
}

fn display(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

/// Aggregate rows (those without a run index) as an aligned table.
fn print_summary(rows: &[Vec<String>]) -> io::Result<()> {
    let header = ["group", "algorithm", "metric", "value"];
    let table: Vec<[&str; 4]> = rows
        .iter()
        .filter(|r| r[2].is_empty())
        .map(|r| [r[0].as_str(), r[1].as_str(), r[3].as_str(), r[4].as_str()])
        .collect();
    let mut widths = header.map(str::len);
    for row in &table {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = io::stdout().lock();
    for row in std::iter::once(&header).chain(&table) {
        let cells: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", cells.join("  ").trim_end())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Separate(args) => run_trace_command(separate(args), &args.output),
        Command::Minimize(args) => run_trace_command(minimize(args), &args.output),
        Command::Experiment(args) => experiment(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
