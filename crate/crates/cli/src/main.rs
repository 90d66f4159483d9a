//! `art`: verify LImp programs with alias refinement types.
//!
//! Exit codes: 0 all functions safe, 1 verification failure, 2 input
//! error, 3 backend or internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use art_core::audit;
use art_core::driver::{self, Config, DriverError, Run};
use art_core::frontend::print_program;

#[derive(Parser)]
#[command(name = "art", version, about = "Alias refinement type checker for LImp programs")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Option<Cmd>,
    #[command(flatten)]
    verify: Common,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check every function and report inferred signatures (default).
    Verify(Common),
    /// Print the program with inferred fold/unfold/conc/pad annotations.
    Elaborate(Common),
    /// Print the generated Horn clauses.
    Constraints(Common),
    /// Print the solution for every refinement variable.
    Solution(Common),
    /// Print the separation-logic reading of a function's context.
    Audit(AuditArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Program to check.
    file: Option<PathBuf>,
    /// Qualifier file; may be repeated.
    #[arg(long = "qualifiers", short = 'q')]
    qualifiers: Vec<PathBuf>,
    /// SMT solver executable (defaults to $ART_SMT, then `z3`).
    #[arg(long)]
    smt: Option<PathBuf>,
    /// Per-query solver timeout in milliseconds.
    #[arg(long, default_value_t = 5000)]
    timeout: u64,
    /// Solver sessions to run in parallel.
    #[arg(short = 'j', default_value_t = 1)]
    jobs: usize,
    /// Machine-readable report.
    #[arg(long)]
    json: bool,
    #[arg(long, value_name = "FILE")]
    emit_annotated: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    emit_constraints: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    emit_solution: Option<PathBuf>,
    /// Write every solver query into this directory.
    #[arg(long, value_name = "DIR")]
    emit_smt: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    /// Function whose context is shown.
    #[arg(long)]
    function: String,
    /// Show the context before the first statement on this line instead
    /// of at function entry.
    #[arg(long)]
    line: Option<u32>,
    /// Unroll structure predicates this many levels.
    #[arg(long)]
    depth: Option<usize>,
}

fn config(c: &Common) -> Result<Config, DriverError> {
    let mut cfg = Config::default();
    for q in &c.qualifiers {
        cfg.load_qualifiers(&driver::read(q)?)?;
    }
    if let Some(p) = &c.smt {
        cfg.smt.path = p.clone();
    }
    cfg.smt.timeout_ms = c.timeout;
    cfg.smt.emit_dir = c.emit_smt.clone();
    cfg.jobs = c.jobs.max(1);
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), DriverError> {
    std::fs::write(path, text).map_err(|e| DriverError::Io(format!("{}: {e}", path.display())))
}

fn source(c: &Common) -> Result<String, DriverError> {
    let f = c.file.as_ref().ok_or_else(|| DriverError::Usage("no input file given".into()))?;
    driver::read(f)
}

fn emit(c: &Common, run: &Run) -> Result<(), DriverError> {
    if let Some(p) = &c.emit_annotated {
        write(p, &print_program(&run.annotated))?;
    }
    if let (Some(p), Some(g)) = (&c.emit_constraints, &run.generated) {
        write(p, &g.cs.dump())?;
    }
    if let (Some(p), Some(o)) = (&c.emit_solution, &run.outcome) {
        write(p, &o.solution().to_string())?;
    }
    Ok(())
}

fn report(c: &Common, run: &Run) -> i32 {
    if c.json {
        println!("{}", run.report.to_json());
    } else {
        print!("{}", run.report.human());
    }
    run.report.exit_code()
}

fn run(cli: Cli) -> Result<i32, DriverError> {
    let cmd = cli.cmd.unwrap_or(Cmd::Verify(cli.verify));
    match cmd {
        Cmd::Verify(c) => {
            let r = driver::verify_source(&source(&c)?, &config(&c)?)?;
            emit(&c, &r)?;
            Ok(report(&c, &r))
        }
        Cmd::Elaborate(c) => {
            let p = driver::load(&source(&c)?)?;
            match art_core::annotate::elaborate(&p) {
                Ok(q) => {
                    let text = print_program(&q);
                    match &c.emit_annotated {
                        Some(f) => write(f, &text)?,
                        None => print!("{text}"),
                    }
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(1)
                }
            }
        }
        Cmd::Constraints(c) => {
            let p = driver::load(&source(&c)?)?;
            let q = match art_core::annotate::elaborate(&p) {
                Ok(q) => q,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(1);
                }
            };
            match art_core::cgen::generate(&q, Default::default()) {
                Ok(g) => {
                    print!("{}", g.cs.dump());
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(1)
                }
            }
        }
        Cmd::Solution(c) => {
            let r = driver::verify_source(&source(&c)?, &config(&c)?)?;
            emit(&c, &r)?;
            match &r.outcome {
                Some(o) => print!("{}", o.solution()),
                None => eprint!("{}", r.report.human()),
            }
            Ok(r.report.exit_code())
        }
        Cmd::Audit(a) => {
            let c = &a.common;
            let p = driver::load(&source(c)?)?;
            let cfg = config(c)?;
            let pt = driver::audit_point(&p, &cfg, &a.function, a.line)?;
            let shown = match a.depth {
                Some(d) => audit::unroll_to(&pt.denotation, &p.resolved_typedefs(), d)?,
                None => pt.denotation.clone(),
            };
            println!("{shown}");
            println!("pure part: {}", pt.pure);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("art: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
