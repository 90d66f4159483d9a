//! The end-to-end pipeline: parse, check well-formedness, infer heap
//! annotations, generate clauses, solve, and report per function.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::annotate::elaborate;
use crate::audit::{self, Assertion, Satisfiability};
use crate::cgen::{self, CgenError, Ctx, Engine, Generated, Mode, Options, World};
use crate::frontend::{parse_program, parse_qualifiers, print_schema, Diagnostic};
use crate::model::*;
use crate::smt::{Backend, SmtConfig, SmtSession, Theory};
use crate::solve::{self, Outcome, Solution, SolveError, SolveOptions, Stats};
use crate::wellformed::check_program;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("{0}")]
    Io(String),
    #[error("{}", show_diags(.0))]
    Parse(Vec<Diagnostic>),
    #[error("{}", .0.join("\n"))]
    WellFormed(Vec<String>),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Audit(#[from] audit::AuditError),
    #[error("{0}")]
    Usage(String),
}

fn show_diags(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| format!("{}: {}", d.span, d.msg)).collect::<Vec<_>>().join("\n")
}

impl DriverError {
    /// 2 for bad input, 3 for backend and internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Solve(_) | DriverError::Audit(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub qualifiers: Vec<Qualifier>,
    pub smt: SmtConfig,
    /// Solver sessions run side by side.
    pub jobs: usize,
    pub cgen: Options,
    pub solve: SolveOptions,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            qualifiers: Vec::new(),
            smt: SmtConfig::default(),
            jobs: 1,
            cgen: Options::default(),
            solve: SolveOptions::default(),
        }
    }
}

impl Config {
    pub fn load_qualifiers(&mut self, src: &str) -> Result<(), DriverError> {
        self.qualifiers.extend(parse_qualifiers(src).map_err(DriverError::Parse)?);
        Ok(())
    }
}

pub fn read(path: &std::path::Path) -> Result<String, DriverError> {
    std::fs::read_to_string(path).map_err(|e| DriverError::Io(format!("{}: {e}", path.display())))
}

/// Parse and check definitions, measures and signatures.
pub fn load(src: &str) -> Result<Program, DriverError> {
    let p = parse_program(src).map_err(DriverError::Parse)?;
    check_program(&p).map_err(|es| DriverError::WellFormed(es.into_iter().map(|e| e.0).collect()))?;
    Ok(p)
}

fn backends(p: &Program, cfg: &Config) -> Result<Vec<Box<dyn Backend>>, DriverError> {
    let cache = crate::smt::SolverCache::default();
    let emitted = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
    (0..cfg.jobs.max(1))
        .map(|_| {
            SmtSession::with_shared(cfg.smt.clone(), Theory::from_program(p), cache.clone(), emitted.clone())
                .map(|s| Box::new(s) as Box<dyn Backend>)
                .map_err(|e| DriverError::Solve(e.into()))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Safe,
    Unsafe,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diag {
    pub message: String,
    pub line: u32,
    pub col: u32,
    /// Typing rule that produced the failing clause.
    pub rule: Option<String>,
    /// The failing clause with the solution applied.
    pub clause: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionVerdict {
    pub function: String,
    pub status: Status,
    /// Signature with inferred refinements in place.
    pub schema: Option<String>,
    /// Each κ of the signature and its solution.
    pub refinements: BTreeMap<String, String>,
    pub diagnostics: Vec<Diag>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub status: Status,
    pub functions: Vec<FunctionVerdict>,
    pub time_ms: u128,
    pub rounds: usize,
    pub checks: usize,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.status == Status::Safe {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn human(&self) -> String {
        let mut out = String::new();
        for f in &self.functions {
            let st = match f.status {
                Status::Safe => "SAFE",
                Status::Unsafe => "UNSAFE",
                Status::Error => "ERROR",
            };
            out.push_str(&format!("{}: {st}\n", f.function));
            if let Some(s) = &f.schema {
                out.push_str(&format!("  {}\n", s.replace('\n', "\n  ")));
            }
            for d in &f.diagnostics {
                out.push_str(&format!("  {}:{}: {}\n", d.line, d.col, d.message));
                if let Some(c) = &d.clause {
                    out.push_str(&format!("    clause: {c}\n"));
                }
            }
        }
        out
    }
}

/// Everything the pipeline produced, for callers that want artifacts.
pub struct Run {
    pub annotated: Program,
    pub generated: Option<Generated>,
    pub outcome: Option<Outcome>,
    pub stats: Stats,
    pub report: Report,
}

fn cgen_failure(p: &Program, e: &CgenError, start: Instant) -> Report {
    let functions = p
        .functions
        .iter()
        .map(|f| FunctionVerdict {
            function: f.name.clone(),
            status: Status::Error,
            schema: None,
            refinements: BTreeMap::new(),
            diagnostics: if f.name == e.func {
                vec![Diag { message: e.msg.clone(), line: e.span.line, col: e.span.col, rule: None, clause: None }]
            } else {
                vec![Diag {
                    message: format!("not checked: `{}` has a typing error", e.func),
                    line: f.span.line,
                    col: f.span.col,
                    rule: None,
                    clause: None,
                }]
            },
        })
        .collect();
    Report { status: Status::Error, functions, time_ms: start.elapsed().as_millis(), rounds: 0, checks: 0 }
}

/// Run the whole pipeline on a loaded program.
pub fn verify_program(p: &Program, cfg: &Config) -> Result<Run, DriverError> {
    let start = Instant::now();
    let annotated = match elaborate(p) {
        Ok(q) => q,
        Err(e) => {
            let report = cgen_failure(p, &e, start);
            return Ok(Run { annotated: p.clone(), generated: None, outcome: None, stats: Stats::default(), report });
        }
    };
    let g = match cgen::generate(&annotated, cfg.cgen) {
        Ok(g) => g,
        Err(e) => {
            let report = cgen_failure(p, &e, start);
            return Ok(Run { annotated, generated: None, outcome: None, stats: Stats::default(), report });
        }
    };
    let mut bs = backends(&annotated, cfg)?;
    let (outcome, stats) = solve::solve(&g.cs, &cfg.qualifiers, &annotated.measures, &mut bs, &cfg.solve)?;
    let sol = outcome.solution();
    let failing: &[Clause] = match &outcome {
        Outcome::Sat(_) => &[],
        Outcome::Unsat(_, cs) => cs,
    };
    let mut functions = Vec::new();
    for f in &annotated.functions {
        let tmpl = &g.schemas[&f.name];
        let schema = sol.apply_schema(tmpl)?;
        let mut ks = std::collections::BTreeSet::new();
        tmpl.clone().map_preds(&mut |q| {
            ks.extend(q.kvars());
            q.clone()
        });
        let refinements =
            ks.into_iter().map(|k| (k.to_string(), Pred::and(sol.get(k).unwrap_or(&[]).iter().cloned()).to_string())).collect();
        let diagnostics: Vec<Diag> = failing
            .iter()
            .filter(|c| c.prov.func == f.name)
            .map(|c| Diag {
                message: failure_message(&c.prov),
                line: c.prov.span.line,
                col: c.prov.span.col,
                rule: Some(c.prov.rule.clone()),
                clause: Some(c.to_string()),
            })
            .collect();
        let status = if diagnostics.is_empty() { Status::Safe } else { Status::Unsafe };
        functions.push(FunctionVerdict {
            function: f.name.clone(),
            status,
            schema: Some(print_schema(&schema)),
            refinements,
            diagnostics,
        });
    }
    let status = if functions.iter().all(|f| f.status == Status::Safe) { Status::Safe } else { Status::Unsafe };
    let report =
        Report { status, functions, time_ms: start.elapsed().as_millis(), rounds: stats.rounds, checks: stats.checks };
    Ok(Run { annotated, generated: Some(g), outcome: Some(outcome), stats, report })
}

fn failure_message(p: &Prov) -> String {
    let what = match p.rule.as_str() {
        "unfold" | "conc" => "pointer may be null here",
        "read" | "write" => "memory access may be on a null pointer",
        "call-arg" | "call-heap" if p.note == format!("call to {}", crate::frontend::parser::ASSERT) => "assertion may fail",
        "call-arg" | "call-heap" => "call precondition may not hold",
        "return" | "return-heap" => "postcondition may not hold",
        _ => "refinement may not hold",
    };
    if p.note.is_empty() {
        format!("{what} ({})", p.rule)
    } else {
        format!("{what} ({}: {})", p.rule, p.note)
    }
}

pub fn verify_source(src: &str, cfg: &Config) -> Result<Run, DriverError> {
    verify_program(&load(src)?, cfg)
}

/// Context of `func` before the first statement on `line` (function entry
/// when `line` is `None`), with inferred refinements substituted.
pub struct AuditPoint {
    pub world: World,
    pub denotation: Assertion,
    pub pure: Satisfiability,
}

pub fn audit_point(p: &Program, cfg: &Config, func: &str, line: Option<u32>) -> Result<AuditPoint, DriverError> {
    let run = verify_program(p, cfg)?;
    let mut bs = backends(&run.annotated, cfg)?;
    audit_in(&run, cfg, func, line, bs[0].as_mut())
}

/// `audit_point` against an existing run and backend.
pub fn audit_in(
    run: &Run,
    cfg: &Config,
    func: &str,
    line: Option<u32>,
    backend: &mut dyn Backend,
) -> Result<AuditPoint, DriverError> {
    let (Some(g), Some(outcome)) = (&run.generated, &run.outcome) else {
        return Err(DriverError::Usage("the program does not type check; nothing to audit".into()));
    };
    let f = run
        .annotated
        .functions
        .iter()
        .find(|f| f.name == func)
        .ok_or_else(|| DriverError::Usage(format!("no function `{func}`")))?;
    let ctx = Ctx::with_schemas(&run.annotated, g.schemas.clone());
    let mut eng = Engine::new(&ctx, Mode::Refined, cfg.cgen);
    let world = match line {
        None => eng.enter(f).map_err(|e| DriverError::Usage(e.to_string()))?,
        Some(l) => {
            eng.probe = Some((func.to_string(), l));
            eng.check_function(f).map_err(|e| DriverError::Usage(e.to_string()))?;
            eng.probed.take().ok_or_else(|| DriverError::Usage(format!("no reachable statement of `{func}` on line {l}")))?
        }
    };
    let world = solved_world(&world, outcome.solution())?;
    let denotation = audit::denote(&world.env, &world.heap);
    let pure = audit::audit_pure(&world.env, &world.heap, backend)?;
    Ok(AuditPoint { world, denotation, pure })
}

/// Solver sessions for `p` as configured.
pub fn sessions(p: &Program, cfg: &Config) -> Result<Vec<Box<dyn Backend>>, DriverError> {
    backends(p, cfg)
}

fn solved_world(w: &World, sol: &Solution) -> Result<World, SolveError> {
    let mut w = w.clone();
    for item in &mut w.env.0 {
        match item {
            EnvItem::Guard(p) => *p = sol.apply(p)?,
            EnvItem::Bind(_, t) => *t = sol.apply_rtype(t)?,
        }
    }
    for b in &mut w.heap.0 {
        b.ty = sol.apply_rtype(&b.ty)?;
    }
    Ok(w)
}
