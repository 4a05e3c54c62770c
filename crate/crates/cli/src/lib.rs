//! `qgdiff` command-line front end.
//!
//! Exit codes: 0 success, 1 solver or output failure, 2 bad input,
//! 3 property-suite failure.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qgdiff_core::diagnostics::{run_suite, PropertyReport, SUITES};
use qgdiff_core::io::{
    plot_svg, read_checkpoint, read_ndjson, write_checkpoint, write_flux_csv, write_solution_csv, Checkpoint,
    NdjsonWriter, WireRecord,
};
use qgdiff_core::scenario::{ScenarioDoc, TimeDoc};
use qgdiff_core::{DiagnosticError, Error, Evolution, IoError, Method, Scenario, ScenarioError, TimeGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PROPERTY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qgdiff", version, about = "Doubly nonlinear diffusion on metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario file against the schema.
    Validate {
        /// Scenario file (alternative to --graph).
        path: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Solve the stationary problem with the sources and fluxes at t = 0.
    SolveElliptic(SolveArgs),
    /// Run implicit Euler and stream one NDJSON record per step.
    SolveParabolic(ParabolicArgs),
    /// Run named property suites.
    Verify {
        /// Suite name, or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random draws per randomized suite (suite default when omitted).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw mass and vertex values of an NDJSON trajectory as SVG.
    Plot {
        /// NDJSON trajectory.
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated vertex ids (default: the first eight).
        #[arg(long, value_delimiter = ',')]
        vertices: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Newton,
    Gluing,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    tol: Option<f64>,
    /// Cells on every edge, overriding the file.
    #[arg(long)]
    cells: Option<usize>,
}

#[derive(Debug, Args)]
struct ParabolicArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Write a checkpoint every K steps.
    #[arg(long, value_name = "K")]
    checkpoint_every: Option<usize>,
    /// Checkpoint file (default: <out>.checkpoint.json).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint, appending to --out.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Recorded in checkpoints.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop after this grid step; resume later from a checkpoint.
    #[arg(long, value_name = "N")]
    max_steps: Option<usize>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn solver(message: impl ToString) -> Self {
        Self {
            code: EXIT_SOLVER,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::input(e)
    }
}

type Outcome = Result<i32, Failure>;

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_INPUT;
        }
    };
    let result = dispatch(cli.command, &pool, stdout, stderr);
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("QGDIFF_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("QGDIFF_THREADS must be a positive integer, got {v:?}"))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| e.to_string())
}

fn dispatch(cmd: Command, pool: &rayon::ThreadPool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Validate { path, graph } => {
            let path = path.or(graph).ok_or_else(|| Failure::input("validate needs a scenario path"))?;
            let s = load(&path, None)?;
            writeln!(
                stdout,
                "ok: {} vertices, {} edges, {} cells",
                s.graph.vertex_count(),
                s.graph.edge_count(),
                s.graph.edges().iter().map(|e| e.cells).sum::<usize>()
            )
            .map_err(Failure::solver)?;
            Ok(EXIT_OK)
        }
        Command::SolveElliptic(args) => solve_elliptic(&args, stdout, stderr),
        Command::SolveParabolic(args) => solve_parabolic(&args, stdout, stderr),
        Command::Verify { suite, seed, trials, out } => verify(&suite, seed, trials, out.as_deref(), pool, stdout),
        Command::Plot { input, out, vertices } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Failure::input(format!("{}: {e}", input.display())))?;
            let records = read_ndjson(&text).map_err(Failure::input)?;
            if records.is_empty() {
                return Err(Failure::input(format!("{}: no records", input.display())));
            }
            let svg = plot_svg(&records, &vertices);
            emit(out.as_deref(), stdout, svg.as_bytes())?;
            Ok(EXIT_OK)
        }
    }
}

fn emit(path: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::solver(format!("{}: {e}", p.display()))),
        None => stdout.write_all(bytes).map_err(Failure::solver),
    }
}

/// Loads a scenario after applying command-line overrides to the document.
fn load(path: &Path, args: Option<(&SolveArgs, Option<f64>, Option<f64>)>) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut doc = ScenarioDoc::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if let Some((a, dt, t_end)) = args {
        if let Some(tol) = a.tol {
            if !(tol > 0.0) {
                return Err(Failure::input("--tol must be positive"));
            }
            doc.solver.tol = Some(tol);
        }
        if let Some(c) = a.cells {
            if c < 2 {
                return Err(Failure::input("--cells must be at least 2"));
            }
            for e in &mut doc.edges {
                e.cells = Some(c);
            }
        }
        if let Some(m) = a.method {
            doc.solver.method = Some(match m {
                MethodArg::Newton => Method::Monolithic,
                MethodArg::Gluing => Method::Gluing,
            });
        }
        if dt.is_some() || t_end.is_some() {
            let base = doc.time;
            let t = TimeDoc {
                t_end: t_end.or(base.map(|b| b.t_end)).ok_or_else(|| Failure::input("--t-end missing and no /time in scenario"))?,
                dt: dt.or(base.map(|b| b.dt)).ok_or_else(|| Failure::input("--dt missing and no /time in scenario"))?,
            };
            doc.time = Some(t);
        }
    }
    doc.build().map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn solve_elliptic(args: &SolveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let s = load(&args.graph, Some((args, None, None)))?;
    let prob = s.elliptic_problem()?;
    let sol = qgdiff_core::solve(&prob, &s.cfg, s.method).map_err(|e| Failure::from(Error::from(e)))?;
    let mut table = Vec::new();
    write_solution_csv(&mut table, &s.graph, &sol).map_err(Failure::solver)?;
    let mut fluxes = Vec::new();
    write_flux_csv(&mut fluxes, &s.graph, &sol).map_err(Failure::solver)?;
    match &args.out {
        Some(p) => {
            emit(Some(p), stdout, &table)?;
            emit(Some(&flux_path(p)), stdout, &fluxes)?;
        }
        None => {
            table.push(b'\n');
            table.extend_from_slice(&fluxes);
            emit(None, stdout, &table)?;
        }
    }
    let worst_kirchhoff = sol.kirchhoff_gaps.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let _ = writeln!(
        stderr,
        "{}: residual {:e}, mass gap {:e}, worst Kirchhoff gap {:e}",
        sol.method, sol.residual_sup, sol.mass_gap, worst_kirchhoff
    );
    Ok(EXIT_OK)
}

/// `sol.csv` → `sol.fluxes.csv`.
fn flux_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}.fluxes.csv"))
}

fn solve_parabolic(args: &ParabolicArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let s = load(&args.solve.graph, Some((&args.solve, args.dt, args.t_end)))?;
    let grid: TimeGrid = s
        .time
        .clone()
        .ok_or_else(|| Failure::input("no time grid: give /time in the scenario or --dt and --t-end"))?;
    let grid = match args.max_steps {
        Some(n) if n < grid.steps() => TimeGrid::from_times(grid.times()[..=n.max(1)].to_vec()).map_err(Failure::input)?,
        _ => grid,
    };
    if args.checkpoint_every == Some(0) {
        return Err(Failure::input("--checkpoint-every must be positive"));
    }
    let ck_path = match (&args.checkpoint, &args.solve.out) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(out)) => Some(out.with_extension("checkpoint.json")),
        (None, None) => None,
    };
    if args.checkpoint_every.is_some() && ck_path.is_none() {
        return Err(Failure::input("--checkpoint-every needs --out or --checkpoint"));
    }
    let resume = match &args.resume {
        Some(p) => {
            let ck = read_checkpoint(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            Some(ck.resume(&s).map_err(|e| match e {
                IoError::GraphHashMismatch { .. } | IoError::Shape(_) => Failure::input(e),
                other => Failure::solver(other),
            })?)
        }
        None => None,
    };
    let mut sink: Box<dyn Write> = match &args.solve.out {
        Some(p) => {
            let file = if resume.is_some() {
                OpenOptions::new().append(true).create(true).open(p)
            } else {
                File::create(p)
            }
            .map_err(|e| Failure::solver(format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(&mut *stdout),
    };
    let mut writer = NdjsonWriter::new(&mut sink);
    let run = Evolution {
        graph: &s.graph,
        schedule: &s.schedule,
        grid: &grid,
        cfg: &s.cfg,
        method: s.method,
    };
    let every = args.checkpoint_every;
    let traj = run
        .evolve(&s.initial, resume, |rec| {
            writer.write(&WireRecord::from_step(&s.graph, rec)).map_err(|e| e.to_string())?;
            if let (Some(k), Some(path)) = (every, ck_path.as_ref()) {
                if rec.index % k == 0 || rec.index == grid.steps() {
                    write_checkpoint(path, &Checkpoint::from_record(&s, rec, args.seed)).map_err(|e| e.to_string())?;
                }
            }
            Ok(())
        })
        .map_err(|e| Failure::from(Error::from(e)))?;
    sink.flush().map_err(Failure::solver)?;
    let last = traj.last();
    let _ = writeln!(
        stderr,
        "{} steps to t = {}, mass {:e}, max Newton iterations {}",
        grid.steps(),
        last.t,
        last.mass,
        traj.records.iter().map(|r| r.newton_iters).max().unwrap_or(0)
    );
    Ok(EXIT_OK)
}

/// Default number of random draws per suite.
pub fn default_trials(suite: &str) -> usize {
    match suite {
        "mass-balance" => 100,
        "comparison" | "linf" => 50,
        "resolvent" | "contraction" | "energy" => 20,
        "integral" => 10,
        _ => 0,
    }
}

/// Text report of the named suites; `Err` on unknown suites or solver
/// failures inside a suite.
pub fn verify_report(suite: &str, seed: u64, trials: Option<usize>) -> Result<(String, bool), DiagnosticError> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let cfg = qgdiff_core::SolverConfig::default();
    let mut text = String::new();
    let mut ok = true;
    for name in names {
        let reports = run_suite(name, seed, trials.unwrap_or_else(|| default_trials(name)), &cfg)?;
        let merged = PropertyReport::merge(name, seed, &reports);
        ok &= merged.passed;
        text.push_str(&format!("{merged}\n"));
        for r in reports.iter().filter(|r| !r.passed || reports.len() <= 10) {
            text.push_str(&format!("  {r}\n"));
        }
    }
    text.push_str(if ok { "all properties hold\n" } else { "property violations found\n" });
    Ok((text, ok))
}

fn verify(
    suite: &str,
    seed: u64,
    trials: Option<usize>,
    out: Option<&Path>,
    pool: &rayon::ThreadPool,
    stdout: &mut dyn Write,
) -> Outcome {
    if suite != "all" && !SUITES.contains(&suite) {
        return Err(Failure::input(format!("unknown suite {suite:?}; known: all, {}", SUITES.join(", "))));
    }
    let (text, ok) = pool
        .install(|| verify_report(suite, seed, trials)).map_err(|e| Failure::from(Error::from(e)))?;
    emit(out, stdout, text.as_bytes())?;
    Ok(if ok { EXIT_OK } else { EXIT_PROPERTY })
}
