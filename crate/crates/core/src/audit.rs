//! Separation-logic reading of typing contexts: the translation of
//! environments and heaps into assertions, snapshots with `walk`/`Unf`,
//! measure evaluation, and two desk-scale checkers (pure satisfiability
//! through a backend, ground evaluation against finite cell maps).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::frontend::print_rtype;
use crate::model::*;
use crate::smt::{Backend, SmtError, Validity};

/// Depth at which type predicates are unrolled when none is given.
pub const DEFAULT_DEPTH: usize = 3;

/// Pure values. `Pair(a, v)` is a pointer to address `a` together with a
/// snapshot `v` of its contents; `Addr` is a bare pointer.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Null,
    Addr(i64),
    Rec(BTreeMap<String, Value>),
    Pair(i64, Box<Value>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => f.write_str("null"),
            Value::Addr(a) => write!(f, "@{a}"),
            Value::Rec(fs) => {
                f.write_str("{")?;
                for (i, (k, v)) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
            Value::Pair(a, v) => write!(f, "(@{a}, {v})"),
        }
    }
}

/// Assertion language. `TyPred` is a folded type predicate, expanded to a
/// bounded depth by [`unroll`]; `Exists` carries evaluation witnesses
/// (binder, term) that the ground checker uses and printing omits.
#[derive(Clone, PartialEq, Debug)]
pub enum Assertion {
    Pure(Pred),
    Emp,
    PointsTo(Term, Term),
    Star(Vec<Assertion>),
    And(Vec<Assertion>),
    Or(Vec<Assertion>),
    Imp(Pred, Box<Assertion>),
    Exists(Vec<Name>, Vec<(Name, Term)>, Box<Assertion>),
    TyPred { ctor: String, args: Vec<RType>, loc: Term, val: Term },
    Unf(Term, Term),
}

/// A quantifiable name: a value variable or a location.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Name {
    V(Var),
    L(Loc),
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Name::V(v) => write!(f, "{v}"),
            Name::L(l) => write!(f, "&{l}"),
        }
    }
}

fn pred_name(ctor: &str) -> String {
    let mut cs = ctor.chars();
    match cs.next() {
        Some(c) => format!("{}{}P", c.to_uppercase(), cs.as_str()),
        None => "P".into(),
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, xs: &[Assertion], sep: &str| -> fmt::Result {
            for (i, a) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                if a.atomic() {
                    write!(f, "{a}")?;
                } else {
                    write!(f, "({a})")?;
                }
            }
            Ok(())
        };
        match self {
            Assertion::Pure(p) => write!(f, "{p}"),
            Assertion::Emp => f.write_str("emp"),
            Assertion::PointsTo(a, v) => write!(f, "{a} |-> {v}"),
            Assertion::Star(xs) if xs.is_empty() => f.write_str("emp"),
            Assertion::Star(xs) => join(f, xs, " * "),
            Assertion::And(xs) if xs.is_empty() => f.write_str("true"),
            Assertion::And(xs) => join(f, xs, " && "),
            Assertion::Or(xs) if xs.is_empty() => f.write_str("false"),
            Assertion::Or(xs) => join(f, xs, " || "),
            Assertion::Imp(g, c) => {
                if c.atomic() {
                    write!(f, "({g}) => {c}")
                } else {
                    write!(f, "({g}) => ({c})")
                }
            }
            Assertion::Exists(ns, _, body) => {
                f.write_str("exists ")?;
                for (i, n) in ns.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, ". {body}")
            }
            Assertion::TyPred { ctor, args, loc, val } => {
                write!(f, "{}(", pred_name(ctor))?;
                for a in args {
                    write!(f, "{}; ", print_rtype(a))?;
                }
                write!(f, "{loc}, {val})")
            }
            Assertion::Unf(l, x) => write!(f, "Unf({l}, {x})"),
        }
    }
}

impl Assertion {
    fn atomic(&self) -> bool {
        match self {
            Assertion::Pure(p) => p.conjuncts().len() <= 1 && !matches!(p, Pred::Or(_) | Pred::Imp(..)),
            Assertion::Emp | Assertion::PointsTo(..) | Assertion::TyPred { .. } | Assertion::Unf(..) => true,
            Assertion::Star(xs) | Assertion::And(xs) | Assertion::Or(xs) => xs.len() <= 1,
            _ => false,
        }
    }

    fn star(xs: Vec<Assertion>) -> Assertion {
        let mut xs: Vec<Assertion> = xs.into_iter().filter(|a| *a != Assertion::Emp).collect();
        if xs.len() == 1 {
            xs.pop().unwrap()
        } else if xs.is_empty() {
            Assertion::Emp
        } else {
            Assertion::Star(xs)
        }
    }

    fn and(xs: Vec<Assertion>) -> Assertion {
        let mut xs: Vec<Assertion> = xs.into_iter().filter(|a| *a != Assertion::Pure(Pred::True)).collect();
        if xs.len() == 1 {
            xs.pop().unwrap()
        } else {
            Assertion::And(xs)
        }
    }

    /// The pure part: spatial atoms become `true`, guards stay.
    pub fn pure_part(&self) -> Pred {
        match self {
            Assertion::Pure(p) => p.clone(),
            Assertion::Emp | Assertion::PointsTo(..) | Assertion::TyPred { .. } | Assertion::Unf(..) => Pred::True,
            Assertion::Star(xs) | Assertion::And(xs) => Pred::and(xs.iter().map(|a| a.pure_part())),
            Assertion::Or(xs) => Pred::or(xs.iter().map(|a| a.pure_part())),
            Assertion::Imp(g, c) => Pred::imp(g.clone(), c.pure_part()),
            Assertion::Exists(_, _, b) => b.pure_part(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("unknown type constructor `{0}`")]
    UnknownCtor(String),
    #[error("`{0}` expects {1} type arguments")]
    Arity(String, usize),
    #[error("stuck evaluating {0}")]
    Stuck(String),
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

/// Translation of a base type at a value term.
fn base_fact(b: &Base, x: &Term) -> Pred {
    let l = |l: &Loc| Term::Loc(l.clone());
    match b {
        Base::Null => Pred::eq(x.clone(), Term::Null),
        Base::Ref(m) => Pred::and([Pred::eq(x.clone(), l(m)), Pred::ne(x.clone(), Term::Null)]),
        Base::MaybeRef(m) => Pred::imp(Pred::ne(x.clone(), Term::Null), Pred::eq(x.clone(), l(m))),
        Base::Record(fs) => Pred::and(fs.iter().map(|(f, t)| local(t, &Term::field(x.clone(), f)))),
        _ => Pred::True,
    }
}

/// `⟨t⟩(x)`: the refinement at `x` together with its base shape.
pub fn local(t: &RType, x: &Term) -> Pred {
    Pred::and([t.pred.at(x), base_fact(&t.base, x)])
}

/// One heap binding, null-guarded. Folded structures stay as `TyPred`.
pub fn heap_binding(b: &HeapBind) -> Assertion {
    let l = Term::Loc(b.loc.clone());
    let x = Term::Var(b.binder.clone());
    let present = match &b.ty.base {
        Base::App(c, args) => Assertion::star(vec![
            Assertion::Pure(b.ty.pred.at(&x)),
            Assertion::TyPred { ctor: c.clone(), args: args.clone(), loc: l.clone(), val: x.clone() },
        ]),
        _ => Assertion::star(vec![Assertion::Pure(local(&b.ty, &x)), Assertion::PointsTo(l.clone(), x.clone())]),
    };
    let present = match present {
        Assertion::Star(mut xs) if xs[0] == Assertion::Pure(Pred::True) => {
            xs.remove(0);
            Assertion::star(xs)
        }
        a => a,
    };
    Assertion::and(vec![
        Assertion::Imp(Pred::ne(l.clone(), Term::Null), Box::new(present)),
        Assertion::Imp(Pred::eq(l, Term::Null), Box::new(Assertion::Pure(Pred::eq(x, Term::Null)))),
    ])
}

/// `⟦Σ⟧`.
pub fn denote_heap(sigma: &Heap) -> Assertion {
    Assertion::star(sigma.0.iter().map(heap_binding).collect())
}

/// `⟦Γ⟧`: guards and per-binding translations, in order.
pub fn denote_env(gamma: &TypeEnv) -> Pred {
    Pred::and(gamma.0.iter().map(|i| match i {
        EnvItem::Guard(p) => p.clone(),
        EnvItem::Bind(x, t) => local(t, &Term::Var(x.clone())),
    }))
}

/// `⟦Γ⟧ ∧ ⟦Σ⟧`.
pub fn denote(gamma: &TypeEnv, sigma: &Heap) -> Assertion {
    let g = Assertion::Pure(denote_env(gamma));
    let h = denote_heap(sigma);
    match (&g, &h) {
        (Assertion::Pure(Pred::True), _) => h,
        (_, Assertion::Emp) => g,
        _ => Assertion::And(vec![g, h]),
    }
}

/// Supplies fresh names for unrolled binders and locations.
#[derive(Default)]
struct Fresh(usize);

impl Fresh {
    fn next(&mut self) -> usize {
        self.0 += 1;
        self.0
    }
}

fn find_def<'a>(defs: &'a [TypeDef], c: &str) -> Result<&'a TypeDef, AuditError> {
    defs.iter().find(|d| d.name == c).ok_or_else(|| AuditError::UnknownCtor(c.into()))
}

fn unfold_def(
    defs: &[TypeDef],
    c: &str,
    args: &[RType],
    l: &Term,
    x: &Term,
    depth: usize,
    fresh: &mut Fresh,
) -> Result<Assertion, AuditError> {
    let d = find_def(defs, c)?;
    if d.params.len() != args.len() {
        return Err(AuditError::Arity(c.into(), d.params.len()));
    }
    let unf = Assertion::Unf(l.clone(), x.clone());
    if depth == 0 {
        return Ok(unf);
    }
    let n = fresh.next();
    let tmap: BTreeMap<String, RType> = d.params.iter().cloned().zip(args.iter().cloned()).collect();
    let mut th = Subst::new();
    let mut names = Vec::new();
    let xc = Var::new(format!("{}_{n}", d.root));
    th.vars.insert(d.root.clone(), Term::Var(xc.clone()));
    names.push(Name::V(xc.clone()));
    for lc in &d.locs {
        let m = Loc::new(format!("{lc}_{n}"));
        th.locs.insert(lc.clone(), m.clone());
        names.push(Name::L(m));
    }
    for e in &d.heap.0 {
        let t = Var::new(format!("{}_{n}", e.binder));
        th.vars.insert(e.binder.clone(), Term::Var(t.clone()));
        names.push(Name::V(t));
    }
    let root_ty = d.root_ty.subst_tyvars(&tmap).subst(&th);
    let heap = d.heap.subst_tyvars(&tmap).subst(&th);
    // A tail binder's snapshot is the field of `x` that points at its location.
    let mut witnesses = Vec::new();
    for e in &heap.0 {
        if let Base::Record(fs) = &root_ty.base {
            if let Some((f, _)) = fs.iter().find(|(_, t)| t.base.loc() == Some(&e.loc)) {
                witnesses.push((Name::V(e.binder.clone()), Term::field(x.clone(), f)));
            }
        }
    }
    let mut parts = vec![Assertion::And(vec![
        Assertion::PointsTo(l.clone(), Term::Var(xc.clone())),
        Assertion::Pure(local(&root_ty, &Term::Var(xc))),
    ])];
    for b in &heap.0 {
        parts.push(unroll(&heap_binding(b), defs, depth - 1, fresh)?);
    }
    Ok(Assertion::And(vec![Assertion::Exists(names, witnesses, Box::new(Assertion::star(parts))), unf]))
}

/// The predicate of constructor `d` at `l` with snapshot `x`, unrolled
/// `depth` times; the innermost obligation is `Unf(l, x)` alone.
pub fn type_predicate(
    defs: &[TypeDef],
    ctor: &str,
    args: &[RType],
    l: &Term,
    x: &Term,
    depth: usize,
) -> Result<Assertion, AuditError> {
    unfold_def(defs, ctor, args, l, x, depth, &mut Fresh::default())
}

fn unroll(a: &Assertion, defs: &[TypeDef], depth: usize, fresh: &mut Fresh) -> Result<Assertion, AuditError> {
    let all = |xs: &[Assertion], fresh: &mut Fresh| -> Result<Vec<Assertion>, AuditError> {
        xs.iter().map(|a| unroll(a, defs, depth, fresh)).collect()
    };
    Ok(match a {
        Assertion::TyPred { ctor, args, loc, val } => unfold_def(defs, ctor, args, loc, val, depth, fresh)?,
        Assertion::Star(xs) => Assertion::Star(all(xs, fresh)?),
        Assertion::And(xs) => Assertion::And(all(xs, fresh)?),
        Assertion::Or(xs) => Assertion::Or(all(xs, fresh)?),
        Assertion::Imp(g, c) => Assertion::Imp(g.clone(), Box::new(unroll(c, defs, depth, fresh)?)),
        Assertion::Exists(ns, ws, b) => Assertion::Exists(ns.clone(), ws.clone(), Box::new(unroll(b, defs, depth, fresh)?)),
        a => a.clone(),
    })
}

/// Expand every folded type predicate to `depth` levels.
pub fn unroll_to(a: &Assertion, defs: &[TypeDef], depth: usize) -> Result<Assertion, AuditError> {
    unroll(a, defs, depth, &mut Fresh::default())
}

/// Root value and cells of a snapshot.
pub fn walk(v: &Value) -> (Value, BTreeMap<i64, Value>) {
    let mut cells = BTreeMap::new();
    let root = walk_into(v, &mut cells);
    (root, cells)
}

fn walk_into(v: &Value, cells: &mut BTreeMap<i64, Value>) -> Value {
    match v {
        Value::Rec(fs) => Value::Rec(fs.iter().map(|(k, e)| (k.clone(), walk_into(e, cells))).collect()),
        Value::Pair(a, e) => {
            let e3 = walk_into(e, cells);
            cells.insert(*a, e3);
            Value::Addr(*a)
        }
        v => v.clone(),
    }
}

/// Cells of `Unf(l, v)`: empty for a null location, otherwise the cells of
/// `walk(v)`, which must include `l` itself.
pub fn unf_cells(l: &Value, v: &Value) -> Option<BTreeMap<i64, Value>> {
    match l {
        Value::Null => Some(BTreeMap::new()),
        Value::Addr(a) => {
            let (_, cells) = walk(v);
            cells.contains_key(a).then_some(cells)
        }
        _ => None,
    }
}

fn as_int(v: &Value, t: &Term) -> Result<i64, AuditError> {
    match v {
        Value::Int(n) => Ok(*n),
        _ => Err(AuditError::Stuck(t.to_string())),
    }
}

fn project(v: &Value, f: &str) -> Option<Value> {
    match v {
        Value::Rec(fs) => fs.get(f).cloned(),
        Value::Pair(_, e) => project(e, f),
        _ => None,
    }
}

/// Bindings for the ground evaluator.
pub type Env = BTreeMap<Name, Value>;

fn eval_term(t: &Term, env: &Env, ms: &[Measure]) -> Result<Option<Value>, AuditError> {
    Ok(Some(match t {
        Term::Int(n) => Value::Int(*n),
        Term::Null => Value::Null,
        Term::Var(v) => match env.get(&Name::V(v.clone())) {
            Some(x) => x.clone(),
            None => return Ok(None),
        },
        Term::Loc(l) => match env.get(&Name::L(l.clone())) {
            Some(x) => x.clone(),
            None => return Ok(None),
        },
        Term::Field(e, f) => {
            let Some(v) = eval_term(e, env, ms)? else { return Ok(None) };
            project(&v, f).ok_or_else(|| AuditError::Stuck(t.to_string()))?
        }
        Term::Meas(m, e) => {
            let Some(v) = eval_term(e, env, ms)? else { return Ok(None) };
            let m = ms.iter().find(|x| &x.name == m).ok_or_else(|| AuditError::UnknownMeasure(m.clone()))?;
            eval_measure(m, &v, ms)?
        }
        Term::Bin(o, a, b) => {
            let (Some(x), Some(y)) = (eval_term(a, env, ms)?, eval_term(b, env, ms)?) else { return Ok(None) };
            let (x, y) = (as_int(&x, a)?, as_int(&y, b)?);
            Value::Int(match o {
                AOp::Add => x.wrapping_add(y),
                AOp::Sub => x.wrapping_sub(y),
                AOp::Mul => x.wrapping_mul(y),
            })
        }
        Term::Ite(c, a, b) => match eval_pred(c, env, ms)? {
            None => return Ok(None),
            Some(true) => return eval_term(a, env, ms),
            Some(false) => return eval_term(b, env, ms),
        },
    }))
}

/// Pointers compare by address, whether or not they carry contents.
fn same_value(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Pair(x, _) | Value::Addr(x), Value::Pair(y, _) | Value::Addr(y)) => x == y,
        _ => a == b,
    }
}

/// Truth of a ground predicate; `None` if some name is unbound.
pub fn eval_pred(p: &Pred, env: &Env, ms: &[Measure]) -> Result<Option<bool>, AuditError> {
    Ok(Some(match p {
        Pred::True => true,
        Pred::False => false,
        Pred::Rel(r, a, b) => {
            let (Some(x), Some(y)) = (eval_term(a, env, ms)?, eval_term(b, env, ms)?) else { return Ok(None) };
            match r {
                Rel::Eq => same_value(&x, &y),
                Rel::Ne => !same_value(&x, &y),
                _ => r.holds(as_int(&x, a)?, as_int(&y, b)?),
            }
        }
        Pred::BVar(t) => match eval_term(t, env, ms)? {
            None => return Ok(None),
            Some(Value::Bool(b)) => b,
            Some(_) => return Err(AuditError::Stuck(t.to_string())),
        },
        Pred::Not(q) => match eval_pred(q, env, ms)? {
            None => return Ok(None),
            Some(b) => !b,
        },
        Pred::And(qs) => {
            for q in qs {
                match eval_pred(q, env, ms)? {
                    None => return Ok(None),
                    Some(false) => return Ok(Some(false)),
                    Some(true) => {}
                }
            }
            true
        }
        Pred::Or(qs) => {
            for q in qs {
                match eval_pred(q, env, ms)? {
                    None => return Ok(None),
                    Some(true) => return Ok(Some(true)),
                    Some(false) => {}
                }
            }
            false
        }
        Pred::Imp(a, b) => match eval_pred(a, env, ms)? {
            None => return Ok(None),
            Some(false) => true,
            Some(true) => return eval_pred(b, env, ms),
        },
        Pred::Iff(a, b) => match (eval_pred(a, env, ms)?, eval_pred(b, env, ms)?) {
            (Some(x), Some(y)) => x == y,
            _ => return Ok(None),
        },
        Pred::K(..) => return Err(AuditError::Stuck(p.to_string())),
    }))
}

/// Structural measure evaluation: the null case at `null`, the recursive
/// case with the parameter bound to `v` otherwise.
pub fn eval_measure(m: &Measure, v: &Value, ms: &[Measure]) -> Result<Value, AuditError> {
    let body = if *v == Value::Null { &m.null_case } else { &m.rec_case };
    let env: Env = [(Name::V(m.param.clone()), v.clone())].into();
    eval_term(body, &env, ms)?.ok_or_else(|| AuditError::Stuck(body.to_string()))
}

fn names_of(p: &Pred) -> BTreeSet<Name> {
    let mut vs = BTreeSet::new();
    p.vars_into(&mut vs);
    let mut ls = BTreeSet::new();
    p.locs_into(&mut ls);
    vs.into_iter().map(Name::V).chain(ls.into_iter().map(Name::L)).collect()
}

/// Unbound names default to `null`: a legitimate witness for existentials
/// that nothing else determines.
fn default_null(p: &Pred, env: &mut Env) {
    for n in names_of(p) {
        env.entry(n).or_insert(Value::Null);
    }
}

fn unbound_name(t: &Term, env: &Env) -> Option<Name> {
    let n = match t {
        Term::Var(v) => Name::V(v.clone()),
        Term::Loc(l) => Name::L(l.clone()),
        _ => return None,
    };
    (!env.contains_key(&n)).then_some(n)
}

/// Footprint of a satisfied assertion; `None` holds on any heap.
type Foot = Option<BTreeSet<i64>>;

/// Ground model checker over a finite cell map.
pub struct Ground<'a> {
    pub heap: &'a BTreeMap<i64, Value>,
    pub measures: &'a [Measure],
}

impl Ground<'_> {
    /// Assume `p`, binding names equated to ground values.
    fn assume(&self, p: &Pred, mut env: Env) -> Result<Vec<Env>, AuditError> {
        match p {
            Pred::And(qs) => {
                let mut envs = vec![env];
                for q in qs {
                    let mut next = Vec::new();
                    for e in envs {
                        next.extend(self.assume(q, e)?);
                    }
                    envs = next;
                }
                Ok(envs)
            }
            Pred::Or(qs) => {
                let mut out = Vec::new();
                for q in qs {
                    out.extend(self.assume(q, env.clone())?);
                }
                Ok(out)
            }
            Pred::Imp(g, c) => {
                if self.decide(g, &mut env)? {
                    self.assume(c, env)
                } else {
                    Ok(vec![env])
                }
            }
            Pred::Rel(Rel::Eq, a, b) => {
                for (x, y) in [(a, b), (b, a)] {
                    if let Some(n) = unbound_name(x, &env) {
                        if let Some(v) = eval_term(y, &env, self.measures)? {
                            env.insert(n, v);
                            return Ok(vec![env]);
                        }
                    }
                }
                Ok(if self.decide(p, &mut env)? { vec![env] } else { vec![] })
            }
            _ => Ok(if self.decide(p, &mut env)? { vec![env] } else { vec![] }),
        }
    }

    fn decide(&self, p: &Pred, env: &mut Env) -> Result<bool, AuditError> {
        default_null(p, env);
        Ok(eval_pred(p, env, self.measures)?.unwrap_or(false))
    }

    /// All (bindings, footprint) under which `a` holds.
    pub fn eval(&self, a: &Assertion, env: Env) -> Result<Vec<(Env, Foot)>, AuditError> {
        match a {
            Assertion::Pure(p) => Ok(self.assume(p, env)?.into_iter().map(|e| (e, None)).collect()),
            Assertion::Emp => Ok(vec![(env, Some(BTreeSet::new()))]),
            Assertion::PointsTo(l, v) => {
                let Some(Value::Addr(addr)) = eval_term(l, &env, self.measures)? else { return Ok(vec![]) };
                let Some(cell) = self.heap.get(&addr) else { return Ok(vec![]) };
                let mut env = env;
                if let Some(n) = unbound_name(v, &env) {
                    env.insert(n, cell.clone());
                } else if eval_term(v, &env, self.measures)?.as_ref() != Some(cell) {
                    return Ok(vec![]);
                }
                Ok(vec![(env, Some([addr].into()))])
            }
            Assertion::Star(xs) | Assertion::And(xs) => {
                let star = matches!(a, Assertion::Star(_));
                let mut acc: Vec<(Env, Foot)> = vec![(env, None)];
                for x in xs {
                    let mut next = Vec::new();
                    for (e, f) in acc {
                        for (e2, f2) in self.eval(x, e)? {
                            let joined = match (&f, f2) {
                                (None, g) => Some(g),
                                (g @ Some(_), None) => Some(g.clone()),
                                (Some(s), Some(t)) if star => s.is_disjoint(&t).then(|| Some(s.union(&t).copied().collect())),
                                (Some(s), Some(t)) => (*s == t).then_some(Some(t)),
                            };
                            if let Some(g) = joined {
                                next.push((e2, g));
                            }
                        }
                    }
                    acc = next;
                }
                Ok(acc)
            }
            Assertion::Or(xs) => {
                let mut out = Vec::new();
                for x in xs {
                    out.extend(self.eval(x, env.clone())?);
                }
                Ok(out)
            }
            Assertion::Imp(g, c) => {
                let mut env = env;
                if self.decide(g, &mut env)? {
                    self.eval(c, env)
                } else {
                    Ok(vec![(env, None)])
                }
            }
            Assertion::Exists(ns, ws, body) => {
                let mut inner = env.clone();
                for n in ns {
                    inner.remove(n);
                }
                for (n, t) in ws {
                    if let Some(v) = eval_term(t, &env, self.measures)? {
                        inner.insert(n.clone(), v);
                    }
                }
                let mut out = Vec::new();
                for (mut e, f) in self.eval(body, inner)? {
                    for n in ns {
                        e.remove(n);
                        if let Some(v) = env.get(n) {
                            e.insert(n.clone(), v.clone());
                        }
                    }
                    out.push((e, f));
                }
                Ok(out)
            }
            Assertion::Unf(l, x) => {
                let (Some(lv), Some(xv)) = (eval_term(l, &env, self.measures)?, eval_term(x, &env, self.measures)?)
                else {
                    return Ok(vec![]);
                };
                let Some(cells) = unf_cells(&lv, &xv) else { return Ok(vec![]) };
                if lv == Value::Null {
                    return Ok(vec![(env, None)]);
                }
                if cells.iter().any(|(a, v)| self.heap.get(a) != Some(v)) {
                    return Ok(vec![]);
                }
                Ok(vec![(env, Some(cells.into_keys().collect()))])
            }
            Assertion::TyPred { .. } => Err(AuditError::Stuck(format!("{a} must be unrolled first"))),
        }
    }

    /// Does `a` hold on exactly this heap under `env`?
    pub fn holds(&self, a: &Assertion, env: Env) -> Result<bool, AuditError> {
        let all: BTreeSet<i64> = self.heap.keys().copied().collect();
        Ok(self.eval(a, env)?.into_iter().any(|(_, f)| f.unwrap_or_default() == all))
    }
}

/// Does `v` belong to the pure values of `t`? Structures are looked up in
/// `defs`; `sigma` supplies the contents of locations a pointer may carry.
pub fn member(v: &Value, t: &Base, sigma: &Heap, defs: &[TypeDef]) -> bool {
    match (t, v) {
        (Base::Null, Value::Null) => true,
        (Base::Int, Value::Int(_)) => true,
        (Base::Bool, Value::Bool(_)) => true,
        (Base::TyVar(_), _) => true,
        (Base::MaybeRef(_), Value::Null) => true,
        (Base::Ref(l) | Base::MaybeRef(l), v) => match sigma.get(l) {
            // A pointer to a folded structure carries that structure's snapshot.
            Some(b) if matches!(b.ty.base, Base::App(..)) => *v != Value::Null && member(v, &b.ty.base, sigma, defs),
            Some(b) => matches!(v, Value::Pair(a, e) if *a != 0 && member(e, &b.ty.base, sigma, defs)),
            None => matches!(v, Value::Addr(_) | Value::Int(_)),
        },
        (Base::Record(fs), Value::Rec(vs)) => {
            fs.len() == vs.len() && fs.iter().all(|(f, ft)| vs.get(f).is_some_and(|x| member(x, &ft.base, sigma, defs)))
        }
        (Base::App(c, args), v) => {
            let Some(d) = defs.iter().find(|d| &d.name == c) else { return false };
            if *v == Value::Null {
                return true;
            }
            let tmap: BTreeMap<String, RType> = d.params.iter().cloned().zip(args.iter().cloned()).collect();
            let heap = d.heap.subst_tyvars(&tmap);
            let root = d.root_ty.subst_tyvars(&tmap);
            matches!(v, Value::Pair(a, e) if *a != 0 && member(e, &root.base, &heap, defs))
        }
        _ => false,
    }
}

/// Build a snapshot of `ctor[args]` from a stream of choices: each
/// structure position reads one choice (even: null, odd: a cell, forced
/// null at `depth` 0), each scalar reads its value. Addresses count up
/// from `next`.
pub fn build_snapshot(
    defs: &[TypeDef],
    ctor: &str,
    args: &[RType],
    depth: usize,
    choices: &mut dyn Iterator<Item = i64>,
    next: &mut i64,
) -> Result<Value, AuditError> {
    let d = find_def(defs, ctor)?;
    if d.params.len() != args.len() {
        return Err(AuditError::Arity(ctor.into(), d.params.len()));
    }
    if depth == 0 || choices.next().unwrap_or(0).rem_euclid(2) == 0 {
        return Ok(Value::Null);
    }
    let tmap: BTreeMap<String, RType> = d.params.iter().cloned().zip(args.iter().cloned()).collect();
    let heap = d.heap.subst_tyvars(&tmap);
    let root = d.root_ty.subst_tyvars(&tmap);
    let addr = *next;
    *next += 1;
    let body = build_base(defs, &root.base, &heap, depth, choices, next)?;
    Ok(Value::Pair(addr, Box::new(body)))
}

fn build_base(
    defs: &[TypeDef],
    b: &Base,
    heap: &Heap,
    depth: usize,
    choices: &mut dyn Iterator<Item = i64>,
    next: &mut i64,
) -> Result<Value, AuditError> {
    Ok(match b {
        Base::Int | Base::TyVar(_) => Value::Int(choices.next().unwrap_or(0)),
        Base::Bool => Value::Bool(choices.next().unwrap_or(0) % 2 != 0),
        Base::Null => Value::Null,
        Base::Record(fs) => {
            let mut out = BTreeMap::new();
            for (f, t) in fs {
                out.insert(f.clone(), build_base(defs, &t.base, heap, depth, choices, next)?);
            }
            Value::Rec(out)
        }
        Base::Ref(l) | Base::MaybeRef(l) => match heap.get(l).map(|e| &e.ty.base) {
            Some(Base::App(c, args)) => build_snapshot(defs, c, args, depth - 1, choices, next)?,
            _ if matches!(b, Base::MaybeRef(_)) => Value::Null,
            _ => Value::Addr(0),
        },
        Base::App(c, args) => build_snapshot(defs, c, args, depth, choices, next)?,
        _ => Value::Null,
    })
}

/// Number of pointer-pair nodes in a snapshot.
pub fn count_nodes(v: &Value) -> usize {
    match v {
        Value::Pair(_, e) => 1 + count_nodes(e),
        Value::Rec(fs) => fs.values().map(count_nodes).sum(),
        _ => 0,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Satisfiability {
    Sat,
    Unsat,
    Unknown,
}

impl fmt::Display for Satisfiability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Satisfiability::Sat => "sat",
            Satisfiability::Unsat => "unsat",
            Satisfiability::Unknown => "unknown",
        })
    }
}

/// Satisfiability of the pure part of `⟦Γ⟧ ∧ ⟦Σ⟧`.
pub fn audit_pure(gamma: &TypeEnv, sigma: &Heap, backend: &mut dyn Backend) -> Result<Satisfiability, AuditError> {
    let p = denote(gamma, sigma).pure_part().simplify();
    Ok(match backend.check(&[p], &Pred::False)? {
        Validity::Valid => Satisfiability::Unsat,
        Validity::Invalid => Satisfiability::Sat,
        Validity::Unknown => Satisfiability::Unknown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    const LIST: &str = "type list[A] = exists! l => t:list[A] . h:{data:A, next:?ref(l)}\n\
                        measure len : list => int { len(null) = 0; len(x) = 1 + len(x.next); }\n";

    fn defs() -> Vec<TypeDef> {
        parse_program(LIST).unwrap().resolved_typedefs()
    }

    fn cell(data: i64, next: Value) -> Value {
        Value::Rec([("data".to_string(), Value::Int(data)), ("next".to_string(), next)].into())
    }

    fn two() -> Value {
        Value::Pair(0x10, Box::new(cell(0, Value::Pair(0x11, Box::new(cell(1, Value::Null))))))
    }

    #[test]
    fn walk_of_two_cells() {
        let (root, cells) = walk(&two());
        assert_eq!(root, Value::Addr(0x10));
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[&0x10], cell(0, Value::Addr(0x11)));
        assert_eq!(cells[&0x11], cell(1, Value::Null));
        assert_eq!(walk(&Value::Int(5)), (Value::Int(5), BTreeMap::new()));
        let r = cell(3, Value::Null);
        assert_eq!(walk(&r), (r, BTreeMap::new()));
    }

    #[test]
    fn len_of_snapshots() {
        let d = defs();
        let len = &d[0].measures[0];
        assert_eq!(eval_measure(len, &two(), &d[0].measures).unwrap(), Value::Int(2));
        assert_eq!(eval_measure(len, &Value::Null, &d[0].measures).unwrap(), Value::Int(0));
        let one = Value::Pair(1, Box::new(cell(7, Value::Null)));
        assert_eq!(eval_measure(len, &one, &d[0].measures).unwrap(), Value::Int(1));
        assert!(matches!(eval_measure(len, &Value::Int(3), &d[0].measures), Err(AuditError::Stuck(_))));
    }

    #[test]
    fn two_cells_satisfy_depth_two() {
        let d = defs();
        let (l, x) = (Term::Loc(Loc::new("L")), Term::var("x"));
        let a = type_predicate(&d, "list", &[RType::int()], &l, &x, 2).unwrap();
        let (_, heap) = walk(&two());
        let env: Env = [(Name::L(Loc::new("L")), Value::Addr(0x10)), (Name::V(Var::new("x")), two())].into();
        let g = Ground { heap: &heap, measures: &d[0].measures };
        assert!(g.holds(&a, env.clone()).unwrap());
        let mut bad = heap.clone();
        bad.insert(0x11, cell(1, Value::Addr(0x10)));
        assert!(!Ground { heap: &bad, measures: &d[0].measures }.holds(&a, env).unwrap());
    }

    #[test]
    fn depth_zero_is_unf_only() {
        let d = defs();
        let (l, x) = (Term::Loc(Loc::new("L")), Term::var("x"));
        let a = type_predicate(&d, "list", &[RType::int()], &l, &x, 0).unwrap();
        assert_eq!(a, Assertion::Unf(l, x));
        assert!(type_predicate(&d, "tree", &[], &Term::Null, &Term::Null, 1).is_err());
    }

    #[test]
    fn depth_one_shape() {
        let d = defs();
        let a = type_predicate(&d, "list", &[RType::int()], &Term::Loc(Loc::new("L")), &Term::var("x"), 1).unwrap();
        let s = a.to_string();
        assert!(s.contains("&L |-> h_1"), "{s}");
        assert!(s.contains("((&l_1 != null) => Unf(&l_1, t_1))"), "{s}");
        assert!(s.contains("(&l_1 = null) => t_1 = null"), "{s}");
    }

    #[test]
    fn denotation_of_maybe_null_pointer() {
        let mut g = TypeEnv::new();
        let x = Var::new("x");
        g.bind(x.clone(), RType::plain(Base::MaybeRef(Loc::new("Lx")))).unwrap();
        g.guard(Pred::eq(Term::Var(x), Term::Null));
        assert_eq!(denote(&g, &Heap::emp()).to_string(), "(x != null => x = &Lx) && x = null");
        assert_eq!(denote(&TypeEnv::new(), &Heap::emp()), Assertion::Emp);
    }

    #[test]
    fn denotation_of_folded_list() {
        let h = Heap(vec![HeapBind {
            loc: Loc::new("Lx"),
            binder: Var::new("x0"),
            ty: RType::plain(Base::App("list".into(), vec![RType::plain(Base::TyVar("A".into()))])),
        }]);
        assert_eq!(
            denote_heap(&h).to_string(),
            "((&Lx != null) => ListP(A; &Lx, x0)) && ((&Lx = null) => x0 = null)"
        );
    }

    #[test]
    fn generated_snapshots_are_members() {
        let d = defs();
        let mut next = 1;
        let v = build_snapshot(&d, "list", &[RType::int()], 5, &mut [1, 4, 1, 5, 0].into_iter(), &mut next).unwrap();
        assert_eq!(count_nodes(&v), 2);
        let t = Base::App("list".into(), vec![RType::int()]);
        assert!(member(&v, &t, &Heap::emp(), &d));
        assert!(!member(&Value::Int(1), &t, &Heap::emp(), &d));
    }
}
