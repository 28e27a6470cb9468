//! Command-line front end.
//!
//! Exit codes: 0 solved and certified, 1 runtime failure, 2 usage error,
//! 3 ran but the result failed certification.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::problems::{
    build_cournot, build_op, build_rotation, build_strongly_pseudomonotone, random_feasible_point,
    CournotParams, OpParams, ProblemInstance, ProblemSpec,
};
use crate::schedule::HarmonicScale;
use crate::solver::{run, Mode, SolveReport, SolverConfig, Status};
use crate::trace::{write_csv, write_jsonl};
use crate::verify::{is_certified, primal_residual, sample_properties};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNCERTIFIED: i32 = 3;

/// Tolerance passed to the residual subsolvers.
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "eqsplit",
    version,
    about = "Splitting solver for monotone equilibrium problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem instance.
    Run(RunArgs),
    /// Reproduce the Cournot oligopoly benchmark table.
    Table1(Table1Args),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Cournot,
    Op,
    Rotation,
    Spm,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Scale c of the step sequence β_k = c/(k+1).
    #[arg(long, default_value_t = 10.0)]
    pub beta_c: f64,
    #[arg(long, value_enum, default_value_t = Mode::ErgodicWithRestart)]
    pub mode: Mode,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Stopping threshold on consecutive-point movement.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Restart threshold on ergodic movement.
    #[arg(long, default_value_t = 1e-3)]
    pub tau: f64,
    /// Smallest accepted primal residual is −cert_tol.
    #[arg(long, default_value_t = 1e-3)]
    pub cert_tol: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    /// Problem dimension for the built-in generators.
    #[arg(long)]
    pub n: Option<usize>,
    /// JSON problem description; overrides the built-in generators.
    #[arg(long)]
    pub param_file: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the iteration trace here (`.jsonl` for JSON lines, CSV otherwise).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Seed for random starting points and sampled property checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random pairs for the sampled property checks (0 disables).
    #[arg(long, default_value_t = 0)]
    pub check_samples: usize,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// One configuration of the benchmark table with the reference counts
/// (total iterations, restarts, iterations since the last restart).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Table1Row {
    pub n: usize,
    pub beta_c: f64,
    pub reference: (usize, usize, usize),
}

pub const TABLE1: [Table1Row; 10] = [
    Table1Row {
        n: 2,
        beta_c: 10.0,
        reference: (2, 0, 2),
    },
    Table1Row {
        n: 3,
        beta_c: 10.0,
        reference: (639, 2, 9),
    },
    Table1Row {
        n: 4,
        beta_c: 10.0,
        reference: (911, 2, 4),
    },
    Table1Row {
        n: 5,
        beta_c: 10.0,
        reference: (1027, 2, 2),
    },
    Table1Row {
        n: 10,
        beta_c: 10.0,
        reference: (1201, 1, 2),
    },
    Table1Row {
        n: 10,
        beta_c: 100.0,
        reference: (266, 1, 2),
    },
    Table1Row {
        n: 15,
        beta_c: 10.0,
        reference: (2967, 2, 2),
    },
    Table1Row {
        n: 15,
        beta_c: 100.0,
        reference: (408, 1, 2),
    },
    Table1Row {
        n: 20,
        beta_c: 10.0,
        reference: (5007, 2, 2),
    },
    Table1Row {
        n: 20,
        beta_c: 100.0,
        reference: (539, 1, 2),
    },
];

#[derive(Clone, Debug)]
pub struct Table1Outcome {
    pub row: Table1Row,
    pub report: std::result::Result<SolveReport<f64>, String>,
    pub residual: Option<f64>,
    pub seconds: f64,
    pub certified: bool,
}

impl SolverArgs {
    pub fn config(&self) -> Result<SolverConfig<f64>> {
        let cfg = SolverConfig::new(self.mode, HarmonicScale::new(self.beta_c)?)
            .with_max_iter(self.max_iter)
            .with_stop_eps(self.eps)
            .with_restart_tau(self.tau);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for SolverArgs {
    fn default() -> Self {
        Self {
            beta_c: 10.0,
            mode: Mode::ErgodicWithRestart,
            max_iter: 10_000,
            eps: 1e-4,
            tau: 1e-3,
            cert_tol: 1e-3,
        }
    }
}

/// Solves one benchmark configuration and certifies the result.
pub fn run_table1_row(row: Table1Row, solver: &SolverArgs) -> Table1Outcome {
    let start = Instant::now();
    let args = SolverArgs {
        beta_c: row.beta_c,
        ..solver.clone()
    };
    let outcome = (|| -> std::result::Result<(SolveReport<f64>, f64), String> {
        let inst = build_cournot(&CournotParams::standard(row.n)).map_err(|e| e.to_string())?;
        let cfg = args.config().map_err(|e| e.to_string())?;
        let report = run(&inst.bifunction, &inst.set, &inst.x0, &cfg).map_err(|e| e.to_string())?;
        let residual = primal_residual(&inst.bifunction, &inst.set, &report.result, RESIDUAL_TOL)
            .map_err(|e| e.to_string())?;
        Ok((report, residual))
    })();
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok((report, residual)) => Table1Outcome {
            row,
            certified: report.status == Status::Converged
                && is_certified(residual, solver.cert_tol),
            report: Ok(report),
            residual: Some(residual),
            seconds,
        },
        Err(e) => Table1Outcome {
            row,
            report: Err(e),
            residual: None,
            seconds,
            certified: false,
        },
    }
}

/// Runs every benchmark row, concurrently; results keep the table order.
pub fn run_table1(solver: &SolverArgs) -> Vec<Table1Outcome> {
    TABLE1
        .par_iter()
        .map(|&row| run_table1_row(row, solver))
        .collect()
}

pub const TABLE1_CSV_HEADER: &str = "n,beta,total_iterations,restarts,iterations_since_restart,reference_total,reference_restarts,reference_since_restart,status,residual,seconds";

pub fn table1_csv<W: Write>(outcomes: &[Table1Outcome], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TABLE1_CSV_HEADER}")?;
    for o in outcomes {
        let (r, p) = (&o.row, o.row.reference);
        match &o.report {
            Ok(rep) => writeln!(
                out,
                "{},{}/(k+1),{},{},{},{},{},{},{},{},{:.3}",
                r.n,
                r.beta_c,
                rep.iterations,
                rep.restarts,
                rep.iterations_since_restart,
                p.0,
                p.1,
                p.2,
                rep.status,
                o.residual.unwrap_or(f64::NAN),
                o.seconds
            )?,
            Err(e) => writeln!(
                out,
                "{},{}/(k+1),,,,{},{},{},failed: {},,{:.3}",
                r.n,
                r.beta_c,
                p.0,
                p.1,
                p.2,
                e.replace(',', ";"),
                o.seconds
            )?,
        }
    }
    out.flush()
}

fn write_table1_text<W: Write>(outcomes: &[Table1Outcome], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "{:>3} | {:>10} | {:>6} | {:>8} | {:>10} | {:>16} | {:>11} | {:>7}",
        "n", "beta_k", "total", "restarts", "since last", "reference", "residual", "seconds"
    )?;
    for o in outcomes {
        let r = &o.row;
        let reference = format!("{}/{}/{}", r.reference.0, r.reference.1, r.reference.2);
        match &o.report {
            Ok(rep) => writeln!(
                out,
                "{:>3} | {:>10} | {:>6} | {:>8} | {:>10} | {:>16} | {:>11.3e} | {:>7.3}{}",
                r.n,
                format!("{}/(k+1)", r.beta_c),
                rep.iterations,
                rep.restarts,
                rep.iterations_since_restart,
                reference,
                o.residual.unwrap_or(f64::NAN),
                o.seconds,
                if o.certified { "" } else { "  NOT CERTIFIED" }
            )?,
            Err(e) => writeln!(
                out,
                "{:>3} | {:>10} | failed: {e}",
                r.n,
                format!("{}/(k+1)", r.beta_c)
            )?,
        }
    }
    Ok(())
}

fn default_instance(
    kind: ProblemKind,
    n: Option<usize>,
    seed: u64,
) -> Result<ProblemInstance<f64>> {
    match kind {
        ProblemKind::Cournot => build_cournot(&CournotParams::standard(n.unwrap_or(2))),
        ProblemKind::Op => {
            let n = n.unwrap_or(1);
            build_op(&OpParams {
                q: Matrix::diagonal(&vec![2.0; n]),
                box_lo: Vector::zeros(n),
                box_hi: Vector::filled(n, 2.0),
            })
        }
        ProblemKind::Rotation => match n {
            None | Some(2) => Ok(build_rotation()),
            Some(other) => Err(Error::InvalidParameter(format!(
                "rotation problem is two-dimensional, got --n {other}"
            ))),
        },
        ProblemKind::Spm => {
            let n = n.unwrap_or(10);
            let mut inst = build_strongly_pseudomonotone(
                n,
                1.0,
                Vector::filled(n, -1.0),
                Vector::filled(n, 1.0),
            )?;
            inst.x0 = random_feasible_point(&inst.set, &mut ChaCha8Rng::seed_from_u64(seed))?;
            Ok(inst)
        }
    }
}

fn spec_kind(spec: &ProblemSpec) -> ProblemKind {
    match spec {
        ProblemSpec::Cournot { .. } => ProblemKind::Cournot,
        ProblemSpec::Op { .. } => ProblemKind::Op,
        ProblemSpec::Rotation { .. } => ProblemKind::Rotation,
        ProblemSpec::Spm { .. } => ProblemKind::Spm,
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn load_instance(args: &RunArgs) -> std::result::Result<ProblemInstance<f64>, Failure> {
    match (&args.param_file, args.problem) {
        (Some(path), kind) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            let spec = ProblemSpec::from_json(&text).map_err(|e| Failure::Usage(e.to_string()))?;
            if let Some(k) = kind {
                if k != spec_kind(&spec) {
                    return Err(Failure::Usage(format!(
                        "--problem {k:?} conflicts with the kind in {}",
                        path.display()
                    )));
                }
            }
            spec.build().map_err(|e| Failure::Usage(e.to_string()))
        }
        (None, Some(kind)) => {
            default_instance(kind, args.n, args.seed).map_err(|e| Failure::Usage(e.to_string()))
        }
        (None, None) => Err(Failure::Usage(
            "either --problem or --param-file is required".into(),
        )),
    }
}

fn write_trace(path: &Path, report: &SolveReport<f64>) -> std::result::Result<(), String> {
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let out = BufWriter::new(file);
    if path.extension().is_some_and(|e| e == "jsonl") {
        write_jsonl(&report.trace, out).map_err(|e| e.to_string())
    } else {
        write_csv(&report.trace, out).map_err(|e| e.to_string())
    }
}

fn cmd_run<W: Write, E: Write>(args: &RunArgs, out: &mut W, err: &mut E) -> i32 {
    let inst = match load_instance(args) {
        Ok(i) => i,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_USAGE;
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_FAILURE;
        }
    };
    let cfg = match args.solver.config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let start = Instant::now();
    let report = match run(&inst.bifunction, &inst.set, &inst.x0, &cfg) {
        Ok(r) => r,
        Err(failure) => {
            let _ = writeln!(err, "error: solver failed: {failure}");
            return EXIT_FAILURE;
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    for w in &report.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let residual = match primal_residual(&inst.bifunction, &inst.set, &report.result, RESIDUAL_TOL)
    {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: residual computation failed: {e}");
            return EXIT_FAILURE;
        }
    };
    let _ = writeln!(
        out,
        "problem={} n={} beta={} mode={} status={} total_iterations={} restarts={} iterations_since_restart={} residual={:e} seconds={:.3}",
        inst.name,
        inst.dim(),
        cfg.schedule.describe(),
        cfg.mode,
        report.status,
        report.iterations,
        report.restarts,
        report.iterations_since_restart,
        residual,
        seconds
    );
    let _ = writeln!(
        out,
        "result={}",
        report
            .result
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    if args.check_samples > 0 && inst.set.is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        match sample_properties(
            &inst.bifunction,
            &inst.set,
            inst.known_solution.as_deref(),
            args.check_samples,
            &mut rng,
        ) {
            Ok(c) => {
                let _ = writeln!(
                    out,
                    "checks samples={} seed={} diagonal={:e} subgradient_gap={:e} monotonicity={:e}{}",
                    args.check_samples,
                    args.seed,
                    c.diagonal,
                    c.subgradient_gap,
                    c.monotonicity,
                    c.dual_gap.map(|g| format!(" dual_gap={g:e}")).unwrap_or_default()
                );
            }
            Err(e) => {
                let _ = writeln!(err, "warning: sampled checks failed: {e}");
            }
        }
    }
    if let Some(path) = &args.trace {
        if let Err(e) = write_trace(path, &report) {
            let _ = writeln!(err, "error: writing trace: {e}");
            return EXIT_FAILURE;
        }
    }
    if report.status == Status::Converged && is_certified(residual, args.solver.cert_tol) {
        EXIT_OK
    } else {
        EXIT_UNCERTIFIED
    }
}

fn cmd_table1<W: Write, E: Write>(args: &Table1Args, out: &mut W, err: &mut E) -> i32 {
    if let Err(e) = args.solver.config() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    let outcomes = run_table1(&args.solver);
    let _ = write_table1_text(&outcomes, &mut *out);
    if let Some(path) = &args.csv {
        let written = File::create(path).and_then(|f| table1_csv(&outcomes, BufWriter::new(f)));
        if let Err(e) = written {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_FAILURE;
        }
    }
    if outcomes.iter().any(|o| o.report.is_err()) {
        EXIT_FAILURE
    } else if outcomes.iter().all(|o| o.certified) {
        EXIT_OK
    } else {
        EXIT_UNCERTIFIED
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, S, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Table1(a) => cmd_table1(a, out, err),
    }
}
