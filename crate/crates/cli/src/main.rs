use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use termdp_core::assumptions::{check_termination, CheckConfig};
use termdp_core::fixtures::{find_fixture, registry};
use termdp_core::io::{
    emit_trace_csv, parse_problem_file, read_policy_csv, read_value_csv, write_policy_csv, write_problem_file,
    write_value_csv,
};
use termdp_core::pi::{MSchedule, TieBreak};
use termdp_core::vi::{default_seeds, multiplicity_scan, residual, Seed, ViConfig};
use termdp_core::{Error, Init, Problem, SolveRequest, SolverRegistry, ValueFunction};

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "termdp", version, about = "Solve and analyze nonnegative-cost control problems with a terminal set")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a solver and write the value function and policy as CSV.
    Solve(SolveArgs),
    /// Residual or fixed-point analysis of a problem.
    Analyze {
        #[arg(value_enum)]
        what: Analysis,
        #[arg(long)]
        problem: PathBuf,
        /// Value CSV (`state,value`); required for `residual`.
        #[arg(long)]
        value: Option<PathBuf>,
    },
    /// Check the termination assumption on a problem.
    Check {
        #[arg(value_enum)]
        what: CheckKind,
        #[arg(long)]
        problem: PathBuf,
        /// Accept local controllability without a spot check.
        #[arg(long)]
        assume_controllable: bool,
    },
    /// Built-in reference problems.
    Fixture {
        #[command(subcommand)]
        cmd: FixtureCmd,
    },
    /// List registered algorithms.
    Algos,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Analysis {
    Residual,
    Multiplicity,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CheckKind {
    Assumptions,
}

#[derive(Subcommand, Debug)]
enum FixtureCmd {
    List,
    Run { name: String },
    /// Write the fixture's problem file.
    Export {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value = "vi")]
    algo: String,
    /// zero, inf-outside, policy:<csv> or value:<csv>.
    #[arg(long, default_value = "zero")]
    init: InitArg,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value = "keep")]
    tie: TieBreak,
    /// Sweeps per OPI round, a constant or a list such as `1,2,5`.
    #[arg(long, default_value = "1")]
    m: MSchedule,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Value CSV destination; stdout when absent.
    #[arg(long)]
    out_value: Option<PathBuf>,
    /// Policy CSV destination; stdout when absent.
    #[arg(long)]
    out_policy: Option<PathBuf>,
}

#[derive(Clone, Debug)]
enum InitArg {
    Zero,
    InfOutside,
    Policy(PathBuf),
    Value(PathBuf),
}

impl FromStr for InitArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "zero" => Ok(InitArg::Zero),
            None if s == "inf-outside" => Ok(InitArg::InfOutside),
            Some(("policy", f)) if !f.is_empty() => Ok(InitArg::Policy(f.into())),
            Some(("value", f)) if !f.is_empty() => Ok(InitArg::Value(f.into())),
            _ => Err(format!("expected zero, inf-outside, policy:<file> or value:<file>, got `{s}`")),
        }
    }
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::NonConvergence { .. } => EXIT_NO_CONVERGENCE,
            Error::Unknown { .. } | Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_INVALID,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_IO, msg: e.to_string() }
    }
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

fn with_path<T>(path: &Path, r: termdp_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.msg = format!("{}: {}", path.display(), f.msg);
        f
    })
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<Problem, Failure> {
    with_path(path, parse_problem_file(path))
}

fn load_value(p: &Problem, path: &Path) -> Result<ValueFunction, Failure> {
    with_path(path, read_value_csv(p, open(path)?))
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let registry = SolverRegistry::builtin();
    let solver = registry.get(&args.algo)?;
    let p = load_problem(&args.problem)?;
    if let Some(t) = args.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(fail(EXIT_USAGE, format!("--tol must be a nonnegative number, got {t}")));
        }
    }
    let init = match &args.init {
        InitArg::Zero => Init::Zero,
        InitArg::InfOutside => Init::InfOutside,
        InitArg::Value(f) => Init::Value(load_value(&p, f)?),
        InitArg::Policy(f) => Init::Policy(with_path(f, read_policy_csv(&p, open(f)?))?),
    };
    let req = SolveRequest {
        init,
        tol: args.tol,
        max_iters: args.max_iters,
        tie: args.tie,
        m: args.m,
        record_snapshots: args.trace.is_some(),
    };
    let out = solver.solve(&p, &req)?;
    if let Some(t) = &args.trace {
        with_path(t, emit_trace_csv(&out.trace, t))?;
    }
    let stdout = io::stdout();
    match &args.out_value {
        Some(f) => write_value_csv(&p, &out.value, create(f)?)?,
        None => write_value_csv(&p, &out.value, stdout.lock())?,
    }
    match &args.out_policy {
        Some(f) => write_policy_csv(&p, &out.policy, create(f)?)?,
        None => {
            if args.out_value.is_none() {
                println!();
            }
            write_policy_csv(&p, &out.policy, stdout.lock())?
        }
    }
    eprintln!(
        "{}: {} after {} iterations, residual {:e}",
        out.algo,
        out.stop,
        out.iterations,
        residual(&p, &out.value)
    );
    if !out.converged {
        return Err(fail(
            EXIT_NO_CONVERGENCE,
            format!("{} stopped without converging ({})", out.algo, out.stop),
        ));
    }
    Ok(())
}

fn analyze(what: Analysis, problem: &Path, value: Option<&Path>) -> Result<(), Failure> {
    let p = load_problem(problem)?;
    let mut w = io::stdout().lock();
    match what {
        Analysis::Residual => {
            let f = value.ok_or_else(|| fail(EXIT_USAGE, "`analyze residual` needs --value"))?;
            let j = load_value(&p, f)?;
            writeln!(w, "residual {:e}", residual(&p, &j))?;
            writeln!(w, "in_j_class {}", j.in_j_class(&p))?;
        }
        Analysis::Multiplicity => {
            let mut seeds = default_seeds(&p);
            if let Some(f) = value {
                seeds.push(Seed::new(f.display().to_string(), load_value(&p, f)?));
            }
            let rep = multiplicity_scan(&p, &seeds, &ViConfig::default())?;
            writeln!(w, "fixed points: {} ({} in class)", rep.fixed_points.len(), rep.in_j_count())?;
            for (i, fp) in rep.fixed_points.iter().enumerate() {
                writeln!(
                    w,
                    "  #{i}: residual {:e}, in_j_class {}, seeds {}",
                    fp.residual,
                    fp.in_j_class,
                    fp.seeds.join(" ")
                )?;
                for x in 0..p.num_states() {
                    writeln!(w, "    {} = {}", p.state_id(x), fp.value.get(x))?;
                }
            }
            for s in &rep.skipped {
                writeln!(
                    w,
                    "  skipped {}: {} iterations, last change {:e}, residual {:e}",
                    s.label, s.iterations, s.last_change, s.residual
                )?;
            }
        }
    }
    Ok(())
}

fn fixture(cmd: FixtureCmd) -> Result<(), Failure> {
    match cmd {
        FixtureCmd::List => {
            for f in registry() {
                println!("{:<10} {}", f.name(), f.summary());
            }
        }
        FixtureCmd::Run { name } => {
            let rep = find_fixture(&name)?.run()?;
            print!("{rep}");
            if !rep.passed() {
                return Err(fail(EXIT_INVALID, format!("fixture {name} has failing checks")));
            }
        }
        FixtureCmd::Export { name, out } => {
            let p = find_fixture(&name)?
                .problem()
                .ok_or_else(|| fail(EXIT_USAGE, format!("fixture {name} has no problem file")))?;
            with_path(&out, write_problem_file(&p, &out))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Command::Solve(args) => solve(args),
        Command::Analyze { what, problem, value } => analyze(what, &problem, value.as_deref()),
        Command::Check {
            what: CheckKind::Assumptions,
            problem,
            assume_controllable,
        } => {
            let p = load_problem(&problem)?;
            let cfg = CheckConfig {
                user_asserts_controllability: assume_controllable,
                ..CheckConfig::default()
            };
            print!("{}", check_termination(&p, &cfg));
            Ok(())
        }
        Command::Fixture { cmd } => fixture(cmd),
        Command::Algos => {
            let reg = SolverRegistry::builtin();
            for name in reg.names() {
                println!("{:<6} {}", name, reg.get(name)?.summary());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
