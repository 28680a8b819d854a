//! `isopursuit`: isometry pursuit, subset search and the replicate harness.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 solver did not converge,
//! 4 rank deficiency, 5 brute search over the cap, 6 pruned support smaller
//! than `D`. All column indices printed are 0-based.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isometry_pursuit::data::{
    load_fixture, load_matrix_csv, prepare_replicate, write_matrix_csv, Fixture, Orientation,
    RawTable, ReplicateSpec,
};
use isometry_pursuit::experiment::{
    deep_dive_csv, replicate_csv, run_deep_dive, run_experiment, ExperimentConfig,
    ExperimentSource, ObjectiveKind,
};
use isometry_pursuit::record::{PhaseTimings, RunRecord, SCHEMA_VERSION};
use isometry_pursuit::{
    brute_search, greedy_search, isometry_loss, isometry_pursuit, normalize_matrix,
    subset_penalty_loss, two_stage_isometry_pursuit, DesignMatrix, Error, Method, Objective,
    SolverConfig, DEFAULT_CAP,
};

#[derive(Parser)]
#[command(
    name = "isopursuit",
    version,
    about = "Select near-orthonormal column subsets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run isometry pursuit and report the pruned support.
    Solve(SolveArgs),
    /// Pick exactly D columns with brute, greedy or two-stage search.
    Select(SelectArgs),
    /// Compare greedy and two-stage selection over seeded replicates.
    Experiment(ExperimentArgs),
    /// Write the normalized matrix w(X, c) as CSV.
    Normalize(NormalizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    /// File rows are features, columns are candidates.
    Rows,
    /// File rows are candidates.
    Cols,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::Rows => Orientation::FeaturesAsRows,
            OrientationArg::Cols => Orientation::FeaturesAsCols,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    Iris,
    Wine,
}

impl From<FixtureArg> for Fixture {
    fn from(f: FixtureArg) -> Self {
        match f {
            FixtureArg::Iris => Fixture::Iris,
            FixtureArg::Wine => Fixture::Wine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Isometry,
    Penalty,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Isometry => ObjectiveKind::Isometry,
            ObjectiveArg::Penalty => ObjectiveKind::Penalty,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Brute,
    Greedy,
    TwoStage,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct InputArgs {
    /// CSV matrix file.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    input: Option<PathBuf>,
    /// Bundled table instead of a file.
    #[arg(long, value_enum)]
    fixture: Option<FixtureArg>,
    #[arg(long, value_enum, default_value = "rows")]
    orientation: OrientationArg,
    /// The first line of the file is a header.
    #[arg(long)]
    header: bool,
    #[command(flatten)]
    prep: PrepArgs,
}

#[derive(Args)]
struct PrepArgs {
    /// Z-score every feature (default for fixtures).
    #[arg(long, overrides_with = "no_standardize")]
    standardize: bool,
    #[arg(long)]
    no_standardize: bool,
    /// Seed for column downsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep floor(P / factor) columns.
    #[arg(long)]
    downsample: Option<f64>,
    /// Keep only the first N features (Wine fixture default: 6).
    #[arg(long)]
    truncate_rows: Option<usize>,
}

impl PrepArgs {
    fn standardize_or(&self, default: bool) -> bool {
        if self.standardize {
            true
        } else if self.no_standardize {
            false
        } else {
            default
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1e-7)]
    eps_abs: f64,
    #[arg(long, default_value_t = 1e-7)]
    eps_rel: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    /// Relative row-norm threshold for the support.
    #[arg(long, default_value_t = 1e-6)]
    tau: f64,
    /// Keep rho fixed instead of balancing residuals.
    #[arg(long)]
    fixed_rho: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            max_iter: self.max_iter,
            support_threshold: self.tau,
            adaptive_rho: !self.fixed_rho,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Destination file (standard output when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "two-stage")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "isometry")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Largest number of subsets a brute search may score.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(
        long,
        value_enum,
        conflicts_with = "matrix_dir",
        required_unless_present = "matrix_dir"
    )]
    fixture: Option<FixtureArg>,
    /// Directory of per-replicate CSV matrices, read in file-name order.
    #[arg(long)]
    matrix_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rows")]
    orientation: OrientationArg,
    #[arg(long)]
    header: bool,
    /// Default 25 for fixtures, 100 for a matrix directory.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Default 2 for fixtures, 1 for a matrix directory.
    #[arg(long)]
    downsample: Option<f64>,
    #[arg(long, overrides_with = "no_standardize")]
    standardize: bool,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    truncate_rows: Option<usize>,
    /// Second-stage objective.
    #[arg(long, value_enum, default_value = "isometry")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    /// Compare exhaustive penalty minimization with two-stage penalty
    /// selection instead (fixtures only).
    #[arg(long, requires = "fixture")]
    deep_dive: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Summary JSON destination (standard output when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-replicate CSV destination.
    #[arg(long)]
    replicates_csv: Option<PathBuf>,
}

#[derive(Args)]
struct NormalizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Replicate { source, .. } => exit_code(source),
        Error::NotConverged(_) => 3,
        Error::RankDeficient { .. } | Error::Stuck { .. } | Error::AllInfeasible => 4,
        Error::CombinatorialBlowup { .. } => 5,
        Error::SupportTooSmall { .. } => 6,
        _ => 2,
    }
}

fn load_input(args: &InputArgs) -> Result<RawTable, Error> {
    let (table, standardize, truncate) = match (args.fixture, &args.input) {
        (Some(f), _) => {
            let f = Fixture::from(f);
            (
                load_fixture(f)?,
                args.prep.standardize_or(true),
                args.prep.truncate_rows.or(f.default_truncation()),
            )
        }
        (None, Some(path)) => (
            load_matrix_csv(path, args.orientation.into(), args.header)?,
            args.prep.standardize_or(false),
            args.prep.truncate_rows,
        ),
        (None, None) => return Err(Error::Domain("pass --input or --fixture".into())),
    };
    let spec = ReplicateSpec {
        seed: args.prep.seed,
        downsample_factor: args.prep.downsample.unwrap_or(1.0),
        standardize,
        truncate_rows: truncate,
    };
    prepare_replicate(&table, &spec)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn render(record: &RunRecord, format: Format) -> Result<String, Error> {
    Ok(match format {
        Format::Json => record.to_json()? + "\n",
        Format::Csv => record.to_csv(),
    })
}

/// Both losses on a size-`D` support; `None` otherwise.
fn losses(
    x: &DesignMatrix,
    support: &[usize],
    c: f64,
) -> Result<(Option<f64>, Option<f64>), Error> {
    if support.len() != x.dim() {
        return Ok((None, None));
    }
    Ok((
        Some(isometry_loss(&x.columns(support)?, c)),
        Some(subset_penalty_loss(x, support, c)?),
    ))
}

fn solve(args: &SolveArgs) -> Result<(), Error> {
    let x = load_input(&args.input)?.design()?;
    let start = Instant::now();
    let (_, support, diagnostics) = isometry_pursuit(&x, args.c, &args.solver.config())?;
    let elapsed = start.elapsed().as_secs_f64();
    let (iso, pen) = losses(&x, support.indices(), args.c)?;
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        method: Method::IsometryPursuitOnly.as_str().into(),
        support: support.indices().to_vec(),
        objective_value: diagnostics.objective,
        isometry_loss: iso,
        subset_penalty: pen,
        intermediate_support: None,
        intermediate_support_size: None,
        c: args.c,
        wall_time_seconds: elapsed,
        timings: PhaseTimings {
            stage1_seconds: Some(elapsed),
            ..PhaseTimings::default()
        },
        diagnostics: Some(diagnostics),
    };
    write_output(
        args.out.output.as_deref(),
        &render(&record, args.out.format)?,
    )
}

fn select(args: &SelectArgs) -> Result<(), Error> {
    let x = load_input(&args.input)?.design()?;
    let objective: Objective = ObjectiveKind::from(args.objective).with_c(args.c);
    let start = Instant::now();
    let outcome = match args.method {
        MethodArg::Brute => brute_search(&x, objective, args.cap)?,
        MethodArg::Greedy => greedy_search(&x, objective)?,
        MethodArg::TwoStage => {
            two_stage_isometry_pursuit(&x, args.c, &args.solver.config(), objective, args.cap)?
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let support = outcome.support.indices().to_vec();
    let (iso, pen) = losses(&x, &support, args.c)?;
    let timings = match args.method {
        MethodArg::Brute => PhaseTimings {
            brute_seconds: Some(elapsed),
            ..PhaseTimings::default()
        },
        MethodArg::Greedy => PhaseTimings {
            greedy_seconds: Some(elapsed),
            ..PhaseTimings::default()
        },
        MethodArg::TwoStage => PhaseTimings::default(),
    };
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        method: outcome.method.as_str().into(),
        support,
        objective_value: outcome.objective_value,
        isometry_loss: iso,
        subset_penalty: pen,
        intermediate_support_size: outcome.intermediate_support.as_ref().map(|s| s.len()),
        intermediate_support: outcome.intermediate_support.map(Vec::from),
        c: args.c,
        wall_time_seconds: elapsed,
        timings,
        diagnostics: outcome.diagnostics,
    };
    write_output(
        args.out.output.as_deref(),
        &render(&record, args.out.format)?,
    )
}

fn experiment(args: &ExperimentArgs) -> Result<(), Error> {
    let (source, base) = match (args.fixture, &args.matrix_dir) {
        (Some(f), _) => (
            ExperimentSource::Fixture(f.into()),
            ExperimentConfig::for_fixture(f.into()),
        ),
        (None, Some(path)) => (
            ExperimentSource::Directory {
                path: path.clone(),
                orientation: args.orientation.into(),
                has_header: args.header,
            },
            ExperimentConfig::for_directory(),
        ),
        (None, None) => return Err(Error::Domain("pass --fixture or --matrix-dir".into())),
    };
    let standardize = if args.standardize {
        true
    } else if args.no_standardize {
        false
    } else {
        base.standardize
    };
    let cfg = ExperimentConfig {
        replicates: args.replicates.unwrap_or(base.replicates),
        master_seed: args.seed,
        c: args.c,
        downsample_factor: args.downsample.unwrap_or(base.downsample_factor),
        standardize,
        truncate_rows: args.truncate_rows.or(base.truncate_rows),
        solver: args.solver.config(),
        cap: args.cap,
        second_stage: args.objective.into(),
        ..base
    };

    if args.deep_dive {
        let Some(f) = args.fixture else {
            return Err(Error::Domain("--deep-dive needs --fixture".into()));
        };
        let outcome = run_deep_dive(f.into(), &cfg)?;
        if let Some(path) = &args.replicates_csv {
            fs::write(path, deep_dive_csv(&outcome))?;
        }
        let text = serde_json::to_string_pretty(&outcome)? + "\n";
        return write_output(args.output.as_deref(), &text);
    }

    let outcome = run_experiment(&source, &cfg)?;
    if let Some(path) = &args.replicates_csv {
        fs::write(path, replicate_csv(&outcome.replicates))?;
    }
    let text = serde_json::to_string_pretty(&outcome.summary)? + "\n";
    write_output(args.output.as_deref(), &text)
}

fn normalize(args: &NormalizeArgs) -> Result<(), Error> {
    let table = load_input(&args.input)?;
    let w = normalize_matrix(&table.values, args.c)?;
    let mut buf = Vec::new();
    write_matrix_csv(&w.entries, &mut buf)?;
    write_output(args.output.as_deref(), &String::from_utf8_lossy(&buf))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Select(a) => select(a),
        Command::Experiment(a) => experiment(a),
        Command::Normalize(a) => normalize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("isopursuit: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
