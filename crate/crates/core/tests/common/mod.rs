#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use art_core::cgen::{self, Generated, Options};
use art_core::driver::{self, Config, Run};
use art_core::frontend::{parse_program, parse_qualifiers, print_program, print_schema};
use art_core::smt::{Backend, SmtConfig, SmtSession, Theory};
use art_core::solve::{self, Outcome, SolveOptions};
use art_core::{erase_annotations, ConstraintSet, KappaGen, Program, Qualifier, Schema};

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn source(name: &str) -> String {
    std::fs::read_to_string(corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn program(name: &str) -> Program {
    parse_program(&source(name)).unwrap_or_else(|e| panic!("{name}: {e:?}"))
}

pub fn erased(p: &Program) -> Program {
    let mut q = p.clone();
    for f in &mut q.functions {
        f.body = erase_annotations(&f.body);
    }
    q
}

pub fn base_quals() -> Vec<Qualifier> {
    parse_qualifiers(&source("base.quals")).unwrap()
}

pub fn config(quals: Vec<Qualifier>) -> Config {
    Config { qualifiers: quals, jobs: 2, ..Config::default() }
}

pub fn verify(name: &str) -> Run {
    driver::verify_source(&source(name), &config(base_quals())).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn z3(p: &Program, n: usize) -> Vec<Box<dyn Backend>> {
    (0..n)
        .map(|_| Box::new(SmtSession::new(SmtConfig::default(), Theory::from_program(p)).unwrap()) as Box<dyn Backend>)
        .collect()
}

/// Elaborate, generate and solve with the given switches.
pub fn solve_with(name: &str, quals: &[Qualifier], opts: Options) -> (Program, Generated, Outcome) {
    let p = art_core::annotate::elaborate(&program(name)).unwrap();
    let g = cgen::generate(&p, opts).unwrap();
    let mut bs = z3(&p, 2);
    let (o, _) = solve::solve(&g.cs, quals, &p.measures, &mut bs, &SolveOptions::default()).unwrap();
    (p, g, o)
}

/// Elaborating the erased program twice changes nothing, and erasing the
/// result gives back the erased input.
pub fn elaboration_stable(name: &str) -> Result<(), String> {
    let p = program(name);
    let once = art_core::annotate::elaborate(&erased(&p)).map_err(|e| e.to_string())?;
    let twice = art_core::annotate::elaborate(&once).map_err(|e| e.to_string())?;
    if print_program(&once) != print_program(&twice) {
        return Err(format!("{name}: elaboration is not idempotent"));
    }
    if print_program(&erased(&once)) != print_program(&erased(&p)) {
        return Err(format!("{name}: erasing the elaboration does not give the input"));
    }
    Ok(())
}

/// Solve, plug the solution into the signatures and check the bodies again
/// against the solved signatures. Only body-local refinement variables
/// (fold type arguments) remain to be inferred; afterwards every clause
/// must be valid.
pub fn recheck(name: &str) -> Result<(), String> {
    let (p, g, o) = solve_with(name, &base_quals(), Options::default());
    let Outcome::Sat(sol) = o else { return Err(format!("{name} does not verify")) };
    let mut schemas: BTreeMap<String, Schema> =
        g.schemas.iter().map(|(f, s)| (f.clone(), sol.apply_schema(s).unwrap())).collect();
    for s in schemas.values_mut() {
        let mut left = false;
        *s = s.map_preds(&mut |q| {
            left |= q.has_kvar();
            q.clone()
        });
        if left {
            return Err(format!("{name}: unsolved signature {}", print_schema(s)));
        }
    }
    schemas.insert("assert".into(), cgen::assert_schema());
    let again = cgen::generate_with(&p, schemas, KappaGen::new(), ConstraintSet::new(), Options::default())
        .map_err(|e| format!("{name}: {e}"))?;
    let mut bs = z3(&p, 1);
    let (o, _) = solve::solve(&again.cs, &base_quals(), &p.measures, &mut bs, &SolveOptions::default())
        .map_err(|e| format!("{name}: {e}"))?;
    let Outcome::Sat(local) = o else { return Err(format!("{name}: solved signatures do not recheck")) };
    for c in &again.cs.clauses {
        let c = local.apply_clause(c).map_err(|e| e.to_string())?;
        let mut hyps = c.env.clone();
        hyps.push(c.body.clone());
        if !bs[0].check(&hyps, &c.head).map_err(|e| e.to_string())?.is_valid() {
            return Err(format!("{name}: {c} is not valid"));
        }
    }
    Ok(())
}

/// Programs that must verify, and those that must not.
pub const SAFE: &[&str] =
    &["absl.limp", "absl_nat.limp", "insert.limp", "insertsort.limp", "client.limp", "ifex.limp", "unfoldfold.limp"];
pub const UNSAFE: &[&str] = &["nullderef.limp", "nullpad.limp"];

/// Golden elaborations: source file, expected output.
pub const ELABORATED: &[(&str, &str)] = &[
    ("absl.limp", "golden/absl.annotated.limp"),
    ("insert.limp", "golden/insert.annotated.limp"),
    ("insertsort.limp", "golden/insertsort.annotated.limp"),
    ("client.limp", "golden/client.annotated.limp"),
    ("ifex.limp", "golden/ifex.annotated.limp"),
];

/// A golden file without its `#` comment lines.
pub fn golden_lines(name: &str) -> String {
    source(name).lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

pub mod props;
