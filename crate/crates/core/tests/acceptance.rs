//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the summary stays readable; exits non-zero on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::test_runner::{Config as PtConfig, TestRunner};

use art_core::annotate::elaborate;
use art_core::cgen::{self, Options};
use art_core::driver::Status;
use art_core::frontend::{parse_qualifiers, print_program};
use art_core::solve::{Outcome, Solution};
use art_core::*;
use common::props::*;
use common::*;

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed<T>(limit: Duration, what: &str, f: impl FnOnce() -> T) -> Result<T, String> {
    let t = Instant::now();
    let out = f();
    let took = t.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, limit {limit:?}"))?;
    Ok(out)
}

fn shown(ps: &Pred) -> String {
    ps.simplify().to_string()
}

fn solved(name: &str, quals: &[Qualifier]) -> Result<(Program, cgen::Generated, Solution), String> {
    let (p, g, o) = solve_with(name, quals, Options::default());
    match o {
        Outcome::Sat(s) => Ok((p, g, s)),
        Outcome::Unsat(_, cs) => Err(format!("{name} does not verify: {} failing clause(s)", cs.len())),
    }
}

fn signature(g: &cgen::Generated, sol: &Solution, f: &str) -> Result<Schema, String> {
    let s = g.schemas.get(f).ok_or_else(|| format!("no signature for {f}"))?;
    sol.apply_schema(s).map_err(|e| e.to_string())
}

fn output(s: &Schema) -> Result<String, String> {
    s.out.as_ref().map(|(_, t)| shown(&t.pred)).ok_or_else(|| "no output type".to_string())
}

/// Refinement of the structure the output pointer refers to.
fn output_structure(s: &Schema) -> Result<String, String> {
    let (_, t) = s.out.as_ref().ok_or("no output type")?;
    let l = t.base.loc().ok_or("output is not a pointer")?;
    let b = s.heap_out.get(l).ok_or_else(|| format!("output location {l} not in the output heap"))?;
    Ok(shown(&b.ty.pred))
}

fn c1_abs() -> Check {
    let quals = parse_qualifiers("qualif Pos(v:int): 0 <= v\nqualif EqA(v:int): v = ~A:int\nqualif LeA(v:int): v <= ~A:int")
        .map_err(|e| format!("{e:?}"))?;
    let (_, g, sol) = timed(Duration::from_secs(2), "abs", || solved("absl.limp", &quals))??;
    let out = output(&signature(&g, &sol, "abs")?)?;
    ensure(out == "0 <= v", || format!("abs output is `{out}`"))
}

fn c2_absr_absl() -> Check {
    let (_, g, sol) = solved("absl.limp", &base_quals())?;
    let r = signature(&g, &sol, "absR")?;
    let data = r
        .heap_out
        .0
        .iter()
        .find_map(|b| b.ty.base.field("data").map(|t| shown(&t.pred)))
        .ok_or("absR output heap has no data field")?;
    ensure(data == "0 <= v", || format!("absR data refinement is `{data}`"))?;
    let l = signature(&g, &sol, "absL")?;
    let elem = l
        .heap_out
        .0
        .iter()
        .find_map(|b| match &b.ty.base {
            Base::App(_, args) => args.first().map(|t| shown(&t.pred)),
            _ => None,
        })
        .ok_or("absL output heap has no list")?;
    ensure(elem == "0 <= v", || format!("absL element refinement is `{elem}`"))?;
    let p = elaborate(&program("absl.limp")).map_err(|e| e.to_string())?;
    let g = cgen::generate(&p, Options::default()).map_err(|e| e.to_string())?;
    let sel: Vec<&Clause> =
        g.cs.clauses.iter().filter(|c| c.prov.func == "absL" && c.prov.rule == "fold" && c.head.has_kvar()).collect();
    let got = projection(&sel);
    ensure(got == golden_lines("golden/absL.fold.clauses"), || format!("absL fold clauses differ:\n{got}"))
}

fn c3_insert() -> Check {
    let (p, g, sol) = timed(Duration::from_secs(5), "insert", || solved("insert.limp", &base_quals()))??;
    let out = output_structure(&signature(&g, &sol, "insert")?)?;
    ensure(out == "len(v) = 1 + len(x0)", || format!("insert output is `{out}`"))?;
    let p = elaborate(&p).map_err(|e| e.to_string())?;
    let g = cgen::generate(&p, Options::default()).map_err(|e| e.to_string())?;
    let sel: Vec<&Clause> = g
        .cs
        .clauses
        .iter()
        .filter(|c| c.prov.func == "insert" && c.prov.rule == "return-heap" && c.head.has_kvar())
        .collect();
    let got = projection(&sel);
    ensure(got == golden_lines("golden/insert.return.clauses"), || format!("insert clauses differ:\n{got}"))
}

fn c4_insertsort() -> Check {
    let (_, g, sol) = timed(Duration::from_secs(5), "insertSort", || solved("insertsort.limp", &base_quals()))??;
    let out = output_structure(&signature(&g, &sol, "insertSort")?)?;
    ensure(out == "len(v) = len(x0)", || format!("insertSort output is `{out}`"))
}

fn c5_null_deref() -> Check {
    let r = verify("nullderef.limp");
    ensure(r.report.status == Status::Unsafe, || format!("nullderef is {:?}", r.report.status))?;
    let conc = r.report.functions.iter().flat_map(|f| &f.diagnostics).any(|d| d.rule.as_deref() == Some("conc"));
    ensure(conc, || format!("no failing conc clause:\n{}", r.report.human()))
}

fn c6_null_return() -> Check {
    let r = verify("nullpad.limp");
    ensure(r.report.status == Status::Unsafe, || format!("nullpad is {:?}", r.report.status))?;
    let msg = r.report.functions.iter().flat_map(|f| &f.diagnostics).any(|d| d.message.contains("assertion may fail"));
    ensure(msg, || format!("assertion failure not reported:\n{}", r.report.human()))
}

fn is_null_test(p: &Pred) -> bool {
    matches!(p, Pred::Rel(Rel::Eq, Term::Var(v), Term::Null) if v.0 == "xn")
}

fn is_tail_guard(p: &Pred) -> bool {
    matches!(p, Pred::Rel(Rel::Ne, Term::Field(_, f), Term::Null) if f == "next")
}

fn c7_fold_guard() -> Check {
    let (p, g, sol) = solved("absl.limp", &base_quals())?;
    let c = g
        .cs
        .clauses
        .iter()
        .find(|c| {
            c.prov.func == "absL"
                && c.prov.rule == "fold"
                && c.env.iter().any(is_null_test)
                && c.env.iter().any(is_tail_guard)
        })
        .ok_or("guarded fold clause not emitted")?;
    let mut bs = z3(&p, 1);
    let applied = sol.apply_clause(c).map_err(|e| e.to_string())?;
    let inconsistent = bs[0].check(&applied.env, &Pred::False).map_err(|e| e.to_string())?;
    ensure(inconsistent.is_valid(), || format!("environment of {applied} is consistent"))?;
    let mut hyps = applied.env.clone();
    hyps.push(applied.body.clone());
    ensure(bs[0].check(&hyps, &applied.head).map_err(|e| e.to_string())?.is_valid(), || format!("{applied} is not valid"))?;

    let off = Options { fold_null_guard: false };
    let (_, _, o) = solve_with("absl_nat.limp", &base_quals(), off);
    ensure(matches!(o, Outcome::Unsat(..)), || "absl_nat still verifies without the guard".into())?;
    let (_, g, o) = solve_with("absl.limp", &base_quals(), off);
    let elem = signature(&g, o.solution(), "absL")?
        .heap_out
        .0
        .iter()
        .find_map(|b| match &b.ty.base {
            Base::App(_, args) => args.first().map(|t| shown(&t.pred)),
            _ => None,
        })
        .unwrap_or_default();
    ensure(elem != "0 <= v", || "absL still infers 0 <= v without the guard".into())
}

fn c8_elaboration() -> Check {
    for (src, golden) in ELABORATED {
        let out = print_program(&elaborate(&erased(&program(src))).map_err(|e| e.to_string())?);
        ensure(out == source(golden), || format!("{src} elaborates differently from {golden}"))?;
    }
    let client = source("golden/client.annotated.limp");
    let (a, b) = (client.find("//: fold(&l1);"), client.find("//: fold(&l2);"));
    ensure(matches!((a, b), (Some(a), Some(b)) if a < b), || "client folds are not l1 then l2".into())?;
    let ifex = source("golden/ifex.annotated.limp");
    ensure(ifex.matches("//: fold(&x);").count() == 2, || "ifex does not fold in both branches".into())
}

fn run_prop<S: proptest::strategy::Strategy>(
    cases: u32,
    s: S,
    f: impl Fn(S::Value) -> Result<(), proptest::test_runner::TestCaseError>,
) -> Check {
    let mut r = TestRunner::new(PtConfig { cases, failure_persistence: None, ..PtConfig::default() });
    r.run(&s, f).map_err(|e| e.to_string())
}

fn c9_properties() -> Check {
    run_prop(500, horn_case(), check_solver_oracle).map_err(|e| format!("solver oracle: {e}"))?;
    for name in SAFE {
        recheck(name)?;
    }
    let t = list_theory();
    run_prop(200, snapshot_input(), |i| check_len_counts_nodes(&t, i)).map_err(|e| format!("len: {e}"))?;
    let len = t.measures.iter().find(|m| m.name == "len").ok_or("no len measure")?;
    let two = audit::eval_measure(len, &two_cells(), &t.measures).map_err(|e| e.to_string())?;
    ensure(two == audit::Value::Int(2), || format!("len of the two-cell list is {two}"))?;
    for name in SAFE.iter().chain(UNSAFE) {
        elaboration_stable(name)?;
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("1 abs infers 0 <= v", c1_abs),
        ("2 absR/absL infer 0 <= v; absL fold clauses", c2_absr_absl),
        ("3 insert infers len(v) = 1 + len(x0); insert clauses", c3_insert),
        ("4 insertSort preserves length", c4_insertsort),
        ("5 possibly-null dereference rejected", c5_null_deref),
        ("6 null-returning call then assert(false) rejected", c6_null_return),
        ("7 fold null guard", c7_fold_guard),
        ("8 annotation inference goldens", c8_elaboration),
        ("9 property suites", c9_properties),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match res {
            Ok(()) => println!("PASS  {name}  ({:.2}s)", t.elapsed().as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
