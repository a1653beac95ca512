//! Command-line front end: `gen`, `solve`, `verify`, `compare`, `bench`,
//! `classify`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::generate::{generate, seed_layout, FieldKind, SeedLayout};
use crate::grid::{ArrivalGrid, GridShape, SeedSet, VelocityGrid};
use crate::io::{format_f64, read_arrivals, read_seeds, read_velocity, write_seeds, GridFile};
use crate::metrics::{compare_solutions, residual, residual_with_seeds, Comparison, ResidualReport};
use crate::operator::UpdateVariant;
use crate::solver::{solve, solve_with_reference, Method, SolveConfig, SolveResult, Tracking};
use crate::worklist::DEFAULT_CHUNK_SIZE;

pub const BENCH_HEADER: &str =
    "method,operator,threads,repeat,wall_time_s,good,empty,bad,total,residual,inversions";

#[derive(Debug, Parser)]
#[command(name = "eikonal", version, about = "Parallel Eikonal solvers on regular 2D grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic velocity grid (and optionally a seed file).
    Gen(GenArgs),
    /// Solve for arrival times and write them as a grid file.
    Solve(SolveArgs),
    /// Print the fixed-point residual of a solution.
    Verify(VerifyArgs),
    /// Compare two arrival grids.
    Compare(CompareArgs),
    /// Time and classify solver runs over a matrix of configurations.
    Bench(BenchArgs),
    /// Classify the updates of a single configuration.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Constant,
    Checkerboard,
    Lognormal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayoutArg {
    Corner,
    Center,
    Scattered,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub nx: usize,
    #[arg(long)]
    pub ny: usize,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Speed of a constant field.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, default_value_t = 1.0)]
    pub slow: f64,
    #[arg(long, default_value_t = 2.0)]
    pub fast: f64,
    /// Checkerboard cell size in nodes.
    #[arg(long, default_value_t = 8)]
    pub cell: usize,
    #[arg(long, default_value_t = 1.0)]
    pub median: f64,
    #[arg(long, default_value_t = 0.25)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also write a seed file with this layout.
    #[arg(long)]
    pub seeds_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LayoutArg::Center)]
    pub seed_layout: LayoutArg,
    #[arg(long, default_value_t = 4)]
    pub seed_count: usize,
}

/// Solver knobs shared by `solve`, `bench` and `classify`.
#[derive(Debug, Args, Clone)]
pub struct SolverArgs {
    /// Worklist bin width; defaults to h / (4 max v).
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, default_value = "decrease", value_parser = parse_tracking)]
    pub tracking: Tracking,
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
    pub chunk_size: usize,
    /// Multiply seed times and 1/v by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub value_scale: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long, default_value = "fmm", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value = "monotone", value_parser = parse_variant)]
    pub operator: UpdateVariant,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Record priority inversions (AMM).
    #[arg(long)]
    pub inversions: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value = "monotone", value_parser = parse_variant)]
    pub operator: UpdateVariant,
    /// Seeds to exclude; without it, local minima are taken as seeds.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "fmm,amm", value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "monotone", value_parser = parse_variant)]
    pub operators: Vec<UpdateVariant>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub threads: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write CSV here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long, default_value = "fmm", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value = "monotone", value_parser = parse_variant)]
    pub operator: UpdateVariant,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<UpdateVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_tracking(s: &str) -> std::result::Result<Tracking, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Runs one parsed command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Solve(args) => cmd_solve(&args, out),
        Command::Verify(args) => cmd_verify(&args, out),
        Command::Compare(args) => cmd_compare(&args, out),
        Command::Bench(args) => cmd_bench(&args, out),
        Command::Classify(args) => cmd_classify(&args, out),
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let shape = GridShape::new(args.nx, args.ny, args.h)?;
    let kind = match args.kind {
        KindArg::Constant => FieldKind::Constant { speed: args.speed },
        KindArg::Checkerboard => FieldKind::Checkerboard { slow: args.slow, fast: args.fast, cell: args.cell },
        KindArg::Lognormal => FieldKind::Lognormal { median: args.median, sigma: args.sigma },
    };
    let field = generate(kind, shape, args.rng_seed)?;
    GridFile::from(&field).write(&args.output)?;
    if let Some(path) = &args.seeds_out {
        let layout = match args.seed_layout {
            LayoutArg::Corner => SeedLayout::Corner,
            LayoutArg::Center => SeedLayout::Center,
            LayoutArg::Scattered => SeedLayout::Scattered { count: args.seed_count },
        };
        write_seeds(path, &seed_layout(&shape, layout, args.rng_seed)?)?;
    }
    Ok(())
}

/// Applies `--value-scale`: seed times times `s`, speeds divided by `s`.
pub fn apply_value_scale(velocity: VelocityGrid, seeds: SeedSet, s: f64) -> Result<(VelocityGrid, SeedSet)> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidConfig(format!("value scale must be positive, got {s}")));
    }
    if s == 1.0 {
        return Ok((velocity, seeds));
    }
    let speeds = velocity.values().iter().map(|v| v / s).collect();
    Ok((VelocityGrid::new(*velocity.shape(), speeds)?, seeds.scaled(s)?))
}

fn load_problem(input: &PathBuf, seeds: &PathBuf, value_scale: f64) -> Result<(VelocityGrid, SeedSet)> {
    let velocity = read_velocity(input)?;
    let seeds = read_seeds(seeds)?;
    seeds.validate_for(velocity.shape())?;
    apply_value_scale(velocity, seeds, value_scale)
}

fn config_from(
    method: Method,
    variant: UpdateVariant,
    threads: usize,
    s: &SolverArgs,
) -> Result<SolveConfig> {
    let mut cfg = SolveConfig::new(method, variant)
        .threads(threads)
        .tracking(s.tracking)
        .epsilon(s.epsilon)
        .chunk_size(s.chunk_size);
    cfg.scale = s.scale;
    cfg.validate()?;
    Ok(cfg)
}

/// Checks the invariants a finished run must satisfy.
fn check_run(cfg: &SolveConfig, result: &SolveResult, report: &ResidualReport) -> Result<()> {
    if !result.stats.is_balanced() {
        return Err(Error::InvariantViolation(format!("update counters do not balance: {:?}", result.stats)));
    }
    if cfg.variant.is_monotone() && !report.is_fixed_point() {
        return Err(Error::InvariantViolation(format!(
            "monotone operator left a residual of {} at {:?}",
            report.max_rel_error, report.argmax
        )));
    }
    Ok(())
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = config_from(args.method, args.operator, args.threads, &args.solver)?
        .track_inversions(args.inversions);
    let (velocity, seeds) = load_problem(&args.input, &args.seeds, args.solver.value_scale)?;
    let result = solve(&velocity, &seeds, &cfg)?;
    let report = residual_with_seeds(&result.arrivals, &velocity, cfg.variant, &seeds)?;
    GridFile::from(&result.arrivals).write(&args.output)?;
    writeln!(
        out,
        "method={} operator={} threads={} wall_time_s={} total_updates={} good={} empty={} bad={} residual={} inversions={}",
        cfg.method,
        cfg.variant,
        cfg.threads,
        format_f64(result.wall_time),
        result.stats.total,
        result.stats.good,
        result.stats.empty,
        result.stats.bad,
        format_f64(report.max_rel_error),
        result.inversions,
    )?;
    check_run(&cfg, &result, &report)
}

pub fn format_residual(report: &ResidualReport) -> String {
    let (i, j) = match report.argmax {
        Some((i, j)) => (i.to_string(), j.to_string()),
        None => (String::new(), String::new()),
    };
    format!("{},{i},{j}", format_f64(report.max_rel_error))
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    let solution = read_arrivals(&args.solution)?;
    let velocity = read_velocity(&args.input)?;
    let report = match &args.seeds {
        Some(path) => residual_with_seeds(&solution, &velocity, args.operator, &read_seeds(path)?)?,
        None => residual(&solution, &velocity, args.operator)?,
    };
    writeln!(out, "max_rel_error,argmax_i,argmax_j")?;
    writeln!(out, "{}", format_residual(&report))?;
    Ok(())
}

pub fn format_comparison(c: &Comparison) -> String {
    format!("{},{},{}", format_f64(c.max_abs), format_f64(c.max_rel), c.bitwise_equal)
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let a = read_arrivals(&args.a)?;
    let b = read_arrivals(&args.b)?;
    let c = compare_solutions(&a, &b)?;
    writeln!(out, "max_abs,max_rel,bitwise_equal")?;
    writeln!(out, "{}", format_comparison(&c))?;
    Ok(())
}

/// One `bench` CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub variant: UpdateVariant,
    pub threads: usize,
    pub repeat: usize,
    pub result_wall_time: f64,
    pub stats: crate::metrics::UpdateCounters,
    pub residual: f64,
    pub inversions: u64,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.variant,
            self.threads,
            self.repeat,
            format_f64(self.result_wall_time),
            self.stats.good,
            self.stats.empty,
            self.stats.bad,
            self.stats.total,
            format_f64(self.residual),
            self.inversions
        )
    }
}

/// The configurations a bench matrix expands to. Single-threaded methods
/// run once per repeat at one thread, whatever the thread list says.
pub fn bench_matrix(
    methods: &[Method],
    variants: &[UpdateVariant],
    threads: &[usize],
) -> Vec<(Method, UpdateVariant, usize)> {
    let mut out = Vec::new();
    for &method in methods {
        for &variant in variants {
            if method.is_parallel() {
                out.extend(threads.iter().map(|&t| (method, variant, t)));
            } else {
                out.push((method, variant, 1));
            }
        }
    }
    out
}

/// Runs a bench matrix. Updates are classified against a sequential
/// fast-marching solve with the monotone operator.
pub fn run_bench(
    velocity: &VelocityGrid,
    seeds: &SeedSet,
    matrix: &[(Method, UpdateVariant, usize)],
    repeats: usize,
    solver: &SolverArgs,
) -> Result<Vec<BenchRow>> {
    let reference = reference_solution(velocity, seeds)?;
    let mut rows = Vec::new();
    for &(method, variant, threads) in matrix {
        let cfg = config_from(method, variant, threads, solver)?.track_inversions(method == Method::Amm);
        for repeat in 0..repeats {
            let result = solve_with_reference(velocity, seeds, &cfg, Some(&reference))?;
            let report = residual_with_seeds(&result.arrivals, velocity, variant, seeds)?;
            check_run(&cfg, &result, &report)?;
            rows.push(BenchRow {
                method,
                variant,
                threads,
                repeat,
                result_wall_time: result.wall_time,
                stats: result.stats,
                residual: report.max_rel_error,
                inversions: result.inversions,
            });
        }
    }
    Ok(rows)
}

pub fn reference_solution(velocity: &VelocityGrid, seeds: &SeedSet) -> Result<ArrivalGrid> {
    let cfg = SolveConfig::new(Method::Fmm, UpdateVariant::MonotoneRoot);
    Ok(solve(velocity, seeds, &cfg)?.arrivals)
}

fn write_rows(rows: &[BenchRow], path: Option<&PathBuf>, out: &mut dyn Write) -> Result<()> {
    let mut file;
    let sink: &mut dyn Write = match path {
        Some(p) => {
            file = BufWriter::new(File::create(p)?);
            &mut file
        }
        None => out,
    };
    writeln!(sink, "{BENCH_HEADER}")?;
    for row in rows {
        writeln!(sink, "{}", row.to_csv())?;
    }
    sink.flush()?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    if args.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be >= 1".into()));
    }
    let (velocity, seeds) = load_problem(&args.input, &args.seeds, args.solver.value_scale)?;
    let matrix = bench_matrix(&args.methods, &args.operators, &args.threads);
    for &(m, v, t) in &matrix {
        config_from(m, v, t, &args.solver)?;
    }
    let rows = run_bench(&velocity, &seeds, &matrix, args.repeats, &args.solver)?;
    write_rows(&rows, args.output.as_ref(), out)
}

pub fn cmd_classify(args: &ClassifyArgs, out: &mut dyn Write) -> Result<()> {
    config_from(args.method, args.operator, args.threads, &args.solver)?;
    let (velocity, seeds) = load_problem(&args.input, &args.seeds, args.solver.value_scale)?;
    let matrix = [(args.method, args.operator, args.threads)];
    let rows = run_bench(&velocity, &seeds, &matrix, 1, &args.solver)?;
    write_rows(&rows, args.output.as_ref(), out)
}
