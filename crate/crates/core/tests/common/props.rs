//! Property checks shared by the proptest suite and the acceptance runner.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use art_core::annotate::fold_order;
use art_core::audit::{self, build_snapshot, count_nodes, eval_measure, walk, Assertion, Env, Ground, Name, Value};
use art_core::frontend::{parse_pred, parse_program, parse_qualifiers, print_program};
use art_core::smt::encode::var_symbol;
use art_core::smt::{Backend, FiniteBackend};
use art_core::solve::{self, instantiate_quals, Outcome, Solution, SolveOptions};
use art_core::wellformed::Checker;
use art_core::*;

use super::program;

// ---------------------------------------------------------------------------
// Solver against exhaustive search

const QUALS: &str = "qualif Pos(v:int): 0 <= v
qualif Zero(v:int): v = 0
qualif Neg(v:int): v < 0
qualif EqX(v:int): v = ~A:int
qualif LeX(v:int): v <= ~A:int
qualif LtX(v:int): v < ~A:int
";

/// A random Horn system over integer κs, each with scope `{x:int}`.
#[derive(Clone, Debug)]
pub struct HornCase {
    pub kappas: u32,
    pub quals: Vec<Qualifier>,
    pub clauses: Vec<Clause>,
}

impl HornCase {
    pub fn constraints(&self) -> ConstraintSet {
        let mut cs = ConstraintSet::new();
        for k in 1..=self.kappas {
            cs.scopes.insert(
                KVar(k),
                KScope { k: KVar(k), nu: Sort::Int, vars: vec![(Var::new("x"), Sort::Int)], origin: String::new() },
            );
        }
        for c in &self.clauses {
            cs.push(c.clone());
        }
        cs
    }
}

fn small_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        Just(Term::nu()),
        Just(Term::var("x")),
        Just(Term::var("y")),
        (-1i64..=1).prop_map(Term::Int),
        Just(Term::add(Term::var("x"), Term::Int(1))),
        Just(Term::sub(Term::var("y"), Term::Int(1))),
    ]
}

fn atom() -> impl Strategy<Value = Pred> {
    (prop_oneof![Just(Rel::Eq), Just(Rel::Ne), Just(Rel::Le), Just(Rel::Lt)], small_term(), small_term())
        .prop_map(|(r, a, b)| Pred::rel(r, a, b))
}

fn kapp(kappas: u32) -> impl Strategy<Value = Pred> {
    (1..=kappas, small_term()).prop_map(|(k, t)| Pred::K(KVar(k), KSubst::single(Var::new("x"), t)))
}

fn clause(kappas: u32) -> impl Strategy<Value = Clause> {
    let hyp = prop_oneof![atom(), kapp(kappas)];
    let head = prop_oneof![2 => kapp(kappas), 1 => atom()];
    (prop::collection::vec(hyp, 0..3), head).prop_map(|(env, head)| Clause {
        id: 0,
        env,
        body: Pred::True,
        head,
        nu_sort: Sort::Int,
        prov: Prov::default(),
    })
}

/// At most three κs and at most six qualifier instances in total.
pub fn horn_case() -> impl Strategy<Value = HornCase> {
    let pool = parse_qualifiers(QUALS).unwrap();
    (1u32..=3).prop_flat_map(move |kappas| {
        let per = (6 / kappas as usize).min(pool.len());
        (Just(kappas), prop::sample::subsequence(pool.clone(), 1..=per), prop::collection::vec(clause(kappas), 1..5))
            .prop_map(|(kappas, quals, clauses)| HornCase { kappas, quals, clauses })
    })
}

fn finite() -> FiniteBackend {
    FiniteBackend::new(-2, 2)
}

fn all_valid(b: &mut dyn Backend, cs: &[&Clause], sol: &Solution) -> bool {
    cs.iter().all(|c| {
        let c = sol.apply_clause(c).unwrap();
        let mut hyps = c.env.clone();
        hyps.push(c.body.clone());
        b.check(&hyps, &c.head).unwrap().is_valid()
    })
}

/// The strongest assignment satisfying every κ-headed clause, found by
/// trying every subset of the instances, and whether the concrete clauses
/// hold under it.
pub fn exhaustive(case: &HornCase) -> (Solution, bool) {
    let cs = case.constraints();
    let inst: Vec<(KVar, Vec<Pred>)> =
        cs.scopes.iter().map(|(k, sc)| (*k, instantiate_quals(&case.quals, sc, &[]))).collect();
    let slots: Vec<(KVar, usize)> = inst.iter().flat_map(|(k, ps)| (0..ps.len()).map(move |i| (*k, i))).collect();
    let with_mask = |mask: u64| {
        let mut s = Solution::default();
        for (k, ps) in &inst {
            s.0.insert(*k, vec![]);
            for (j, p) in ps.iter().enumerate() {
                let bit = slots.iter().position(|x| *x == (*k, j)).unwrap();
                if mask >> bit & 1 == 1 {
                    s.0.get_mut(k).unwrap().push(p.clone());
                }
            }
        }
        s
    };
    let defining: Vec<&Clause> = cs.clauses.iter().filter(|c| c.head.has_kvar()).collect();
    let concrete: Vec<&Clause> = cs.clauses.iter().filter(|c| !c.head.has_kvar()).collect();
    let mut b = finite();
    let mut best = 0u64;
    for mask in 0..1u64 << slots.len() {
        if all_valid(&mut b, &defining, &with_mask(mask)) {
            best |= mask;
        }
    }
    let sol = with_mask(best);
    assert!(all_valid(&mut b, &defining, &sol), "valid assignments are closed under union");
    let ok = all_valid(&mut b, &concrete, &sol);
    (sol, ok)
}

fn as_sets(s: &Solution) -> BTreeMap<KVar, BTreeSet<Pred>> {
    s.0.iter().map(|(k, ps)| (*k, ps.iter().cloned().collect())).collect()
}

pub fn check_solver_oracle(case: HornCase) -> Result<(), TestCaseError> {
    let cs = case.constraints();
    let mut bs: Vec<Box<dyn Backend>> = vec![Box::new(finite())];
    let (o, _) = solve::solve(&cs, &case.quals, &[], &mut bs, &SolveOptions::default()).unwrap();
    let (want, ok) = exhaustive(&case);
    prop_assert_eq!(as_sets(o.solution()), as_sets(&want));
    prop_assert_eq!(matches!(o, Outcome::Sat(_)), ok);
    Ok(())
}

// ---------------------------------------------------------------------------
// Snapshots and the separation-logic reading

pub struct ListTheory {
    pub defs: Vec<TypeDef>,
    pub measures: Vec<Measure>,
}

pub fn list_theory() -> ListTheory {
    let p = program("absl.limp");
    ListTheory { defs: p.resolved_typedefs(), measures: p.measures.clone() }
}

/// Choice stream and depth for `build_snapshot`.
pub fn snapshot_input() -> impl Strategy<Value = (Vec<i64>, usize)> {
    (prop::collection::vec(-3i64..4, 0..40), 0usize..=5)
}

pub fn snapshot(t: &ListTheory, choices: &[i64], depth: usize, first: i64) -> Value {
    let mut next = first;
    build_snapshot(&t.defs, "list", &[RType::int()], depth, &mut choices.iter().copied(), &mut next).unwrap()
}

pub fn check_len_counts_nodes(t: &ListTheory, (choices, depth): (Vec<i64>, usize)) -> Result<(), TestCaseError> {
    let v = snapshot(t, &choices, depth, 1);
    let len = t.measures.iter().find(|m| m.name == "len").unwrap();
    prop_assert_eq!(eval_measure(len, &v, &t.measures).unwrap(), Value::Int(count_nodes(&v) as i64));
    prop_assert!(count_nodes(&v) <= depth);
    Ok(())
}

/// The two-cell snapshot `(1, {data:0, next:(2, {data:1, next:null})})`.
pub fn two_cells() -> Value {
    let cell = |d: i64, n: Value| Value::Rec([("data".to_string(), Value::Int(d)), ("next".to_string(), n)].into());
    Value::Pair(1, Box::new(cell(0, Value::Pair(2, Box::new(cell(1, Value::Null))))))
}

fn list_at(t: &ListTheory, l: &str, x: &str, depth: usize) -> Assertion {
    audit::type_predicate(&t.defs, "list", &[RType::int()], &Term::Loc(Loc::new(l)), &Term::var(x), depth).unwrap()
}

fn root(v: &Value) -> Value {
    match v {
        Value::Pair(a, _) => Value::Addr(*a),
        v => v.clone(),
    }
}

/// A non-null snapshot satisfies its own type predicate on exactly the
/// cells it walks, and not once a stray cell is added.
pub fn check_predicate_matches_walk(t: &ListTheory, (choices, depth): (Vec<i64>, usize)) -> Result<(), TestCaseError> {
    let v = snapshot(t, &choices, depth, 1);
    prop_assume!(v != Value::Null);
    let (_, heap) = walk(&v);
    let env: Env = [(Name::L(Loc::new("L")), root(&v)), (Name::V(Var::new("x")), v.clone())].into();
    for d in 0..=depth + 1 {
        let a = list_at(t, "L", "x", d);
        let exact = Ground { heap: &heap, measures: &t.measures }.holds(&a, env.clone()).unwrap();
        prop_assert!(exact, "depth {}", d);
        let mut more = heap.clone();
        more.insert(999, Value::Int(0));
        let extra = Ground { heap: &more, measures: &t.measures }.holds(&a, env.clone()).unwrap();
        prop_assert!(!extra, "depth {} with a stray cell", d);
    }
    Ok(())
}

/// Disjoint structures satisfy the separating conjunction of their
/// predicates; one structure cannot satisfy both sides.
pub fn check_separation(
    t: &ListTheory,
    (c1, d1): (Vec<i64>, usize),
    (c2, d2): (Vec<i64>, usize),
) -> Result<(), TestCaseError> {
    let v1 = snapshot(t, &c1, d1, 1);
    let v2 = snapshot(t, &c2, d2, 100);
    prop_assume!(v1 != Value::Null && v2 != Value::Null);
    let star = Assertion::Star(vec![list_at(t, "L1", "x1", 2), list_at(t, "L2", "x2", 2)]);
    let (_, mut heap) = walk(&v1);
    heap.extend(walk(&v2).1);
    let env = |a: &Value, b: &Value| -> Env {
        [
            (Name::L(Loc::new("L1")), root(a)),
            (Name::V(Var::new("x1")), a.clone()),
            (Name::L(Loc::new("L2")), root(b)),
            (Name::V(Var::new("x2")), b.clone()),
        ]
        .into()
    };
    let g = Ground { heap: &heap, measures: &t.measures };
    prop_assert!(g.holds(&star, env(&v1, &v2)).unwrap());
    let (_, own) = walk(&v1);
    let shared = Ground { heap: &own, measures: &t.measures };
    prop_assert!(!shared.holds(&star, env(&v1, &v1)).unwrap());
    Ok(())
}

// ---------------------------------------------------------------------------
// Names, substitution, well-formedness

pub fn check_fresh_names(hints: Vec<u8>, draws: usize) -> Result<(), TestCaseError> {
    let names = ["x", "t", "x1", "tmp", "l"];
    let mut g = NameGen::new();
    g.reserve_var(&Var::new("x1"));
    let mut seen = BTreeSet::from(["x1".to_string()]);
    let mut locs = BTreeSet::new();
    for i in 0..draws {
        let h = names[hints[i % hints.len()] as usize % names.len()];
        let v = match i % 3 {
            0 => g.fresh_var(h).0,
            1 => g.fresh_binder(&Loc::new(h)).0,
            _ => {
                let l = g.fresh_loc(h).0;
                prop_assert!(locs.insert(l.clone()), "location {} drawn twice", l);
                continue;
            }
        };
        prop_assert!(seen.insert(v.clone()), "{} drawn twice", v);
    }
    Ok(())
}

fn pred_over(vars: &'static [&'static str]) -> impl Strategy<Value = Pred> {
    let term = prop_oneof![
        prop::sample::select(vars).prop_map(Term::var),
        (-2i64..3).prop_map(Term::Int),
    ];
    let term = term.prop_recursive(2, 6, 2, |t| {
        (prop_oneof![Just(AOp::Add), Just(AOp::Sub), Just(AOp::Mul)], t.clone(), t)
            .prop_map(|(o, a, b)| Term::Bin(o, Box::new(a), Box::new(b)))
    });
    let rel = prop_oneof![Just(Rel::Eq), Just(Rel::Ne), Just(Rel::Le), Just(Rel::Lt), Just(Rel::Ge), Just(Rel::Gt)];
    let atom = (rel, term.clone(), term).prop_map(|(r, a, b)| Pred::rel(r, a, b));
    atom.prop_recursive(3, 12, 3, |p| {
        prop_oneof![
            p.clone().prop_map(|q| Pred::Not(Box::new(q))),
            prop::collection::vec(p.clone(), 2..4).prop_map(Pred::And),
            prop::collection::vec(p.clone(), 2..4).prop_map(Pred::Or),
            (p.clone(), p).prop_map(|(a, b)| Pred::Imp(Box::new(a), Box::new(b))),
        ]
    })
}

pub fn small_pred() -> impl Strategy<Value = Pred> {
    pred_over(&["x", "y", "z"])
}

/// Renaming to a fresh name and back is the identity; substituting twice
/// with a substitution whose range avoids its domain equals once.
pub fn check_subst(p: Pred) -> Result<(), TestCaseError> {
    let there = Subst::var(Var::new("x"), Term::var("w"));
    let back = Subst::var(Var::new("w"), Term::var("x"));
    prop_assert_eq!(p.subst(&there).subst(&back), p.clone());
    prop_assert!(!p.subst(&there).vars().contains(&Var::new("x")));
    let mut s = Subst::new();
    s.vars.insert(Var::new("x"), Term::add(Term::var("w"), Term::Int(1)));
    s.vars.insert(Var::new("y"), Term::Int(3));
    let once = p.subst(&s);
    prop_assert_eq!(once.subst(&s), once);
    Ok(())
}

fn wf_type_ok(gamma: &[&str], t: &RType) -> bool {
    let mut g = TypeEnv::new();
    for x in gamma {
        g.bind(Var::new(*x), RType::int()).unwrap();
    }
    Checker::new(&[], &[]).wf_type(&g, &Heap::emp(), t).is_ok()
}

/// Well-formedness holds exactly when the refinement mentions only bound
/// names, and so survives extending the environment.
pub fn check_wf_monotone(p: Pred, gamma: Vec<bool>) -> Result<(), TestCaseError> {
    let all = ["x", "y", "z"];
    let small: Vec<&str> = all.iter().zip(&gamma).filter(|(_, b)| **b).map(|(x, _)| *x).collect();
    let t = RType::new(Base::Int, p.clone());
    let ok = wf_type_ok(&small, &t);
    let free: BTreeSet<Var> = p.vars();
    let expected = free.iter().all(|v| small.contains(&v.0.as_str()));
    prop_assert_eq!(ok, expected);
    if ok {
        prop_assert!(wf_type_ok(&all, &t));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Fold ordering against permutation search

pub fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=6).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..8)))
}

fn valid_order(order: &[usize], deps: &BTreeMap<usize, BTreeSet<usize>>) -> bool {
    order.iter().enumerate().all(|(i, l)| deps.get(l).into_iter().flatten().all(|d| order[..i].contains(d)))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// `fold_order` succeeds exactly when some permutation respects every
/// dependency, returns such a permutation, and breaks ties by name.
pub fn check_fold_order((n, edges): (usize, Vec<(usize, usize)>)) -> Result<(), TestCaseError> {
    let mut deps: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (a, b) in edges {
        deps.entry(a).or_default().insert(b);
    }
    let loc = |i: usize| Loc::new(format!("l{i}"));
    let locs: BTreeSet<Loc> = (0..n).map(loc).collect();
    let ldeps: BTreeMap<Loc, BTreeSet<Loc>> =
        deps.iter().map(|(a, bs)| (loc(*a), bs.iter().map(|b| loc(*b)).collect())).collect();
    let valid: Vec<Vec<usize>> = permutations(n).into_iter().filter(|p| valid_order(p, &deps)).collect();
    match fold_order(&locs, &ldeps) {
        Ok(order) => {
            let idx: Vec<usize> = order.iter().map(|l| l.0[1..].parse().unwrap()).collect();
            prop_assert!(valid.contains(&idx), "{:?} is not a valid order", idx);
            let best = valid.iter().min_by_key(|p| p.iter().map(|i| loc(*i)).collect::<Vec<_>>()).unwrap();
            prop_assert_eq!(&idx, best);
        }
        Err(left) => {
            prop_assert!(valid.is_empty(), "rejected although {:?} works", valid[0]);
            prop_assert!(!left.is_empty());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Encoding and printing

pub fn identifier() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z_][a-z0-9_]{0,3}",
        "~[A-Z]{1,2}",
        prop::sample::select(vec!["nu", "null", "and", "or", "not", "ite", "Int", "v!x", "abs", "div"])
            .prop_map(|s: &str| s.to_string()),
    ]
}

pub fn check_symbols_injective(a: String, b: String) -> Result<(), TestCaseError> {
    let (va, vb) = (Var::new(a.as_str()), Var::new(b.as_str()));
    if a != b {
        prop_assert_ne!(var_symbol(&va), var_symbol(&vb));
    }
    prop_assert!(!var_symbol(&va).starts_with("loc!") && !var_symbol(&va).starts_with("f!"));
    Ok(())
}

/// A printed predicate reparses to one with the same truth table.
pub fn check_pred_round_trip(p: Pred) -> Result<(), TestCaseError> {
    let text = p.to_string();
    let q = parse_pred(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e:?}")))?;
    prop_assert_eq!(q.to_string(), text.clone());
    let mut b = FiniteBackend::new(-2, 2);
    prop_assert!(b.check(std::slice::from_ref(&p), &q).unwrap().is_valid(), "{}", text);
    prop_assert!(b.check(&[q], &p).unwrap().is_valid(), "{}", text);
    Ok(())
}

#[derive(Clone, Debug)]
pub enum GStmt {
    Var(usize, GExpr),
    Alloc(usize, GExpr),
    Read(usize, usize),
    Write(usize, GExpr),
    Call(usize, usize, Vec<GExpr>),
    If(usize, GExpr, Vec<GStmt>, Vec<GStmt>),
    Fold(usize),
    Unfold(usize),
    Return(GExpr),
}

#[derive(Clone, Debug)]
pub enum GExpr {
    Num(u8),
    Var(usize),
    Bin(char, Box<GExpr>, Box<GExpr>),
}

const VARS: [&str; 4] = ["a", "b", "c", "d"];

fn gexpr() -> impl Strategy<Value = GExpr> {
    prop_oneof![(0u8..20).prop_map(GExpr::Num), (0..4usize).prop_map(GExpr::Var)].prop_recursive(2, 6, 2, |e| {
        (prop::sample::select(vec!['+', '-', '*']), e.clone(), e).prop_map(|(o, a, b)| GExpr::Bin(o, Box::new(a), Box::new(b)))
    })
}

fn gstmt() -> impl Strategy<Value = GStmt> {
    let leaf = prop_oneof![
        (0..4usize, gexpr()).prop_map(|(x, e)| GStmt::Var(x, e)),
        (0..4usize, gexpr()).prop_map(|(x, e)| GStmt::Alloc(x, e)),
        (0..4usize, 0..4usize).prop_map(|(x, y)| GStmt::Read(x, y)),
        (0..4usize, gexpr()).prop_map(|(x, e)| GStmt::Write(x, e)),
        (0..4usize, 0..3usize, prop::collection::vec(gexpr(), 0..3)).prop_map(|(x, f, a)| GStmt::Call(x, f, a)),
        (0..4usize).prop_map(GStmt::Fold),
        (0..4usize).prop_map(GStmt::Unfold),
        gexpr().prop_map(GStmt::Return),
    ];
    leaf.prop_recursive(2, 12, 3, |s| {
        (0..6usize, gexpr(), prop::collection::vec(s.clone(), 0..3), prop::collection::vec(s, 0..3))
            .prop_map(|(r, e, a, b)| GStmt::If(r, e, a, b))
    })
}

pub fn gprogram() -> impl Strategy<Value = Vec<Vec<GStmt>>> {
    prop::collection::vec(prop::collection::vec(gstmt(), 0..6), 1..4)
}

fn show_expr(e: &GExpr, out: &mut String) {
    match e {
        GExpr::Num(n) => out.push_str(&n.to_string()),
        GExpr::Var(x) => out.push_str(VARS[*x]),
        GExpr::Bin(o, a, b) => {
            out.push('(');
            show_expr(a, out);
            out.push_str(&format!(" {o} "));
            show_expr(b, out);
            out.push(')');
        }
    }
}

fn expr_text(e: &GExpr) -> String {
    let mut s = String::new();
    show_expr(e, &mut s);
    s
}

fn def(hint: usize, fresh: &mut usize) -> String {
    *fresh += 1;
    format!("{}{}", VARS[hint], fresh)
}

fn show_stmts(ss: &[GStmt], indent: usize, fresh: &mut usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    for s in ss {
        let line = match s {
            GStmt::Var(x, e) => format!("var {} = {};", def(*x, fresh), expr_text(e)),
            GStmt::Alloc(x, e) => format!("var {} = {{data:{}, next:null}};", def(*x, fresh), expr_text(e)),
            GStmt::Read(x, y) => format!("var {} = {}.data;", def(*x, fresh), VARS[*y]),
            GStmt::Write(x, e) => format!("{}.data = {};", VARS[*x], expr_text(e)),
            GStmt::Call(x, f, args) => {
                let a: Vec<String> = args.iter().map(expr_text).collect();
                format!("var {} = f{}({});", def(*x, fresh), f, a.join(", "))
            }
            GStmt::Fold(x) => format!("//: fold(&{});", VARS[*x]),
            GStmt::Unfold(x) => format!("//: unfold(&{});", VARS[*x]),
            GStmt::Return(e) => format!("return {};", expr_text(e)),
            GStmt::If(r, e, a, b) => {
                let rel = ["==", "!=", "<", "<=", ">", ">="][*r];
                out.push_str(&format!("{pad}if ({} {rel} 0) {{\n", expr_text(e)));
                show_stmts(a, indent + 1, fresh, out);
                out.push_str(&format!("{pad}}} else {{\n"));
                show_stmts(b, indent + 1, fresh, out);
                out.push_str(&format!("{pad}}}\n"));
                continue;
            }
        };
        out.push_str(&format!("{pad}{line}\n"));
    }
}

pub fn program_text(fs: &[Vec<GStmt>]) -> String {
    let mut out = String::new();
    for (i, body) in fs.iter().enumerate() {
        out.push_str(&format!("(a:int, b:int) => int\nfunction f{i}(a, b){{\n"));
        show_stmts(body, 1, &mut 0, &mut out);
        out.push_str("}\n\n");
    }
    out
}

/// Generated programs parse, and printing then reparsing reaches a fixed
/// point with the same structure.
pub fn check_program_round_trip(fs: Vec<Vec<GStmt>>) -> Result<(), TestCaseError> {
    let text = program_text(&fs);
    let p = parse_program(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
    let printed = print_program(&p);
    let q = parse_program(&printed).map_err(|e| TestCaseError::fail(format!("{e:?}\n{printed}")))?;
    prop_assert_eq!(print_program(&q), printed.clone());
    prop_assert_eq!(p.functions.len(), q.functions.len());
    for (a, b) in p.functions.iter().zip(&q.functions) {
        let (mut ka, mut kb) = (Vec::new(), Vec::new());
        walk_stmts(&a.body, &mut |s| ka.push(std::mem::discriminant(&s.kind)));
        walk_stmts(&b.body, &mut |s| kb.push(std::mem::discriminant(&s.kind)));
        prop_assert_eq!(ka, kb);
    }
    Ok(())
}
