//! Predicate abstraction: each κ starts as the conjunction of every
//! well-sorted qualifier instance over its scope and is weakened until
//! every clause with a κ head is valid. Concrete clauses are then checked
//! against the resulting assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::*;
use crate::smt::{Backend, SmtError, Validity};

/// κ ↦ conjunction of qualifier instances.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Solution(pub BTreeMap<KVar, Vec<Pred>>);

impl Solution {
    pub fn get(&self, k: KVar) -> Option<&[Pred]> {
        self.0.get(&k).map(|v| v.as_slice())
    }

    /// Replace each κ application by its predicates under the pending
    /// substitution.
    pub fn apply(&self, p: &Pred) -> Result<Pred, SolveError> {
        let missing = p.kvars().into_iter().find(|k| !self.0.contains_key(k));
        if let Some(k) = missing {
            return Err(SolveError::UnknownKappa(k));
        }
        Ok(p.map_kapps(&|k, s| Pred::and(self.0[&k].iter().cloned()).subst(&s.as_subst())))
    }

    pub fn apply_rtype(&self, t: &RType) -> Result<RType, SolveError> {
        let mut err = None;
        let out = t.map_preds(&mut |p| match self.apply(p) {
            Ok(q) => q,
            Err(e) => {
                err.get_or_insert(e);
                p.clone()
            }
        });
        err.map_or(Ok(out), Err)
    }

    pub fn apply_schema(&self, s: &Schema) -> Result<Schema, SolveError> {
        let mut err = None;
        let out = s.map_preds(&mut |p| match self.apply(p) {
            Ok(q) => q,
            Err(e) => {
                err.get_or_insert(e);
                p.clone()
            }
        });
        err.map_or(Ok(out), Err)
    }

    pub fn apply_clause(&self, c: &Clause) -> Result<Clause, SolveError> {
        Ok(Clause {
            env: c.env.iter().map(|p| self.apply(p)).collect::<Result<_, _>>()?,
            body: self.apply(&c.body)?,
            head: self.apply(&c.head)?,
            ..c.clone()
        })
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, ps) in &self.0 {
            writeln!(f, "{k} := {}", Pred::and(ps.iter().cloned()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error("no scope recorded for {0}")]
    NoScope(KVar),
    #[error("{0} has no solution entry")]
    UnknownKappa(KVar),
    #[error("iteration budget of {0} rounds exceeded")]
    Budget(usize),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Extra rounds allowed beyond the number of initial instances.
    pub slack: usize,
    /// Fixed round limit, overriding the instance-based default.
    pub budget: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { slack: 8, budget: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub rounds: usize,
    pub checks: usize,
    pub instances: usize,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Sat(Solution),
    /// The strongest assignment leaves these concrete clauses invalid
    /// (shown with the assignment applied).
    Unsat(Solution, Vec<Clause>),
}

impl Outcome {
    pub fn solution(&self) -> &Solution {
        match self {
            Outcome::Sat(s) | Outcome::Unsat(s, _) => s,
        }
    }
}

fn sort_matches(pat: &SortPat, s: &Sort, binds: &mut BTreeMap<String, Sort>) -> bool {
    match pat {
        SortPat::Is(t) => t == s,
        SortPat::Any(a) => {
            if !matches!(s, Sort::Int | Sort::Ptr | Sort::Snap(_) | Sort::TyVar(_)) {
                return false;
            }
            match binds.get(a) {
                Some(t) => t == s,
                None => {
                    binds.insert(a.clone(), s.clone());
                    true
                }
            }
        }
    }
}

/// Sort of a term when it is determined, `Err` when ill-sorted.
fn term_sort(t: &Term, env: &BTreeMap<Var, Sort>, ms: &[Measure]) -> Result<Option<Sort>, ()> {
    Ok(match t {
        Term::Int(_) => Some(Sort::Int),
        Term::Null | Term::Loc(_) => Some(Sort::Ptr),
        Term::Var(v) => env.get(v).cloned(),
        Term::Field(a, _) => {
            term_sort(a, env, ms)?;
            None
        }
        Term::Meas(m, a) => {
            let s = term_sort(a, env, ms)?;
            match (ms.iter().find(|x| &x.name == m), s) {
                (Some(d), Some(Sort::Snap(c))) if c != d.ctor => return Err(()),
                (Some(_), Some(Sort::Int | Sort::Bool | Sort::Ptr | Sort::TyVar(_))) => return Err(()),
                _ => {}
            }
            match ms.iter().find(|x| &x.name == m).map(|d| d.sort) {
                Some(MeasSort::Bool) => Some(Sort::Bool),
                _ => Some(Sort::Int),
            }
        }
        Term::Bin(_, a, b) => {
            for x in [a, b] {
                if !matches!(term_sort(x, env, ms)?, None | Some(Sort::Int)) {
                    return Err(());
                }
            }
            Some(Sort::Int)
        }
        Term::Ite(_, a, b) => {
            let (x, y) = (term_sort(a, env, ms)?, term_sort(b, env, ms)?);
            x.or(y)
        }
    })
}

fn well_sorted(p: &Pred, env: &BTreeMap<Var, Sort>, ms: &[Measure]) -> bool {
    match p {
        Pred::True | Pred::False | Pred::K(..) => true,
        Pred::BVar(t) => matches!(term_sort(t, env, ms), Ok(None | Some(Sort::Bool))),
        Pred::Rel(r, a, b) => {
            let (Ok(x), Ok(y)) = (term_sort(a, env, ms), term_sort(b, env, ms)) else { return false };
            match r {
                Rel::Eq | Rel::Ne => match (x, y) {
                    (Some(Sort::Bool), _) | (_, Some(Sort::Bool)) => false,
                    (Some(s), Some(t)) => s == t || (s == Sort::Ptr && matches!(t, Sort::Ptr)),
                    _ => true,
                },
                _ => matches!(x, None | Some(Sort::Int)) && matches!(y, None | Some(Sort::Int)),
            }
        }
        Pred::Not(a) => well_sorted(a, env, ms),
        Pred::And(ps) | Pred::Or(ps) => ps.iter().all(|q| well_sorted(q, env, ms)),
        Pred::Imp(a, b) | Pred::Iff(a, b) => well_sorted(a, env, ms) && well_sorted(b, env, ms),
    }
}

/// Every instance of the qualifiers whose wildcards are replaced by
/// sort-matching variables of the scope, deduplicated.
pub fn instantiate_quals(quals: &[Qualifier], scope: &KScope, ms: &[Measure]) -> Vec<Pred> {
    let mut out: Vec<Pred> = Vec::new();
    let mut env: BTreeMap<Var, Sort> = scope.vars.iter().cloned().collect();
    env.insert(Var::nu(), scope.nu.clone());
    for q in quals {
        let mut binds = BTreeMap::new();
        if !sort_matches(&q.nu_sort, &scope.nu, &mut binds) {
            continue;
        }
        let mut partial = vec![(binds, Subst::new())];
        for (w, pat) in &q.wildcards {
            let mut next = Vec::new();
            for (b, s) in &partial {
                for (x, xs) in &scope.vars {
                    let mut b2 = b.clone();
                    if sort_matches(pat, xs, &mut b2) {
                        let mut s2 = s.clone();
                        s2.vars.insert(Var::new(format!("~{w}")), Term::Var(x.clone()));
                        next.push((b2, s2));
                    }
                }
            }
            partial = next;
        }
        for (_, s) in partial {
            let p = q.body.subst(&s);
            if well_sorted(&p, &env, ms) && !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Hypotheses of a clause under an assignment: environment and body.
fn hyps(c: &Clause, sol: &Solution) -> Result<Vec<Pred>, SolveError> {
    let mut hs = Vec::with_capacity(c.env.len() + 1);
    for p in c.env.iter().chain(std::iter::once(&c.body)) {
        hs.extend(sol.apply(p)?.conjuncts());
    }
    Ok(hs)
}

struct Task {
    clause: usize,
    k: KVar,
    hyps: Vec<Pred>,
    goals: Vec<(usize, Pred)>,
}

/// Indices into the κ's instance list that fail.
fn run_task(b: &mut dyn Backend, t: &Task, checks: &mut usize) -> Result<Vec<usize>, SmtError> {
    *checks += 1;
    let all = Pred::and(t.goals.iter().map(|(_, g)| g.clone()));
    if t.goals.is_empty() || b.check(&t.hyps, &all)? == Validity::Valid {
        return Ok(vec![]);
    }
    let mut bad = Vec::new();
    for (i, g) in &t.goals {
        *checks += 1;
        if b.check(&t.hyps, g)? != Validity::Valid {
            bad.push(*i);
        }
    }
    Ok(bad)
}

/// Weaken to the strongest fixpoint, spreading each round's validity
/// checks over the given backends.
pub fn solve(
    cs: &ConstraintSet,
    quals: &[Qualifier],
    ms: &[Measure],
    backends: &mut [Box<dyn Backend>],
    opts: &SolveOptions,
) -> Result<(Outcome, Stats), SolveError> {
    let mut stats = Stats::default();
    let mut sol = Solution::default();
    let mut used = BTreeSet::new();
    for c in &cs.clauses {
        used.extend(c.head.kvars());
        used.extend(c.body.kvars());
        c.env.iter().for_each(|p| used.extend(p.kvars()));
    }
    for k in used.iter().chain(cs.scopes.keys()) {
        let sc = cs.scopes.get(k).ok_or(SolveError::NoScope(*k))?;
        let inst = instantiate_quals(quals, sc, ms);
        stats.instances += inst.len();
        sol.0.insert(*k, inst);
    }
    let budget = opts.budget.unwrap_or(stats.instances + opts.slack);

    let mut readers: BTreeMap<KVar, BTreeSet<usize>> = BTreeMap::new();
    let mut work = BTreeSet::new();
    for (i, c) in cs.clauses.iter().enumerate() {
        let mut ks = c.body.kvars();
        c.env.iter().for_each(|p| ks.extend(p.kvars()));
        for k in ks {
            readers.entry(k).or_default().insert(i);
        }
        if c.head_kvar().is_some() {
            work.insert(i);
        }
    }

    while !work.is_empty() {
        stats.rounds += 1;
        if stats.rounds > budget {
            return Err(SolveError::Budget(budget));
        }
        let mut tasks = Vec::new();
        for &i in &work {
            let c = &cs.clauses[i];
            let Pred::K(k, s) = &c.head else { continue };
            let sub = s.as_subst();
            let goals = sol.0[k].iter().enumerate().map(|(j, q)| (j, q.subst(&sub))).collect();
            tasks.push(Task { clause: i, k: *k, hyps: hyps(c, &sol)?, goals });
        }
        work.clear();
        let failed = run_round(backends, &tasks, &mut stats.checks)?;
        let mut drop: BTreeMap<KVar, BTreeSet<usize>> = BTreeMap::new();
        for (t, bad) in tasks.iter().zip(failed) {
            if !bad.is_empty() {
                drop.entry(t.k).or_default().extend(bad);
            }
        }
        for (k, bad) in drop {
            let v = sol.0.get_mut(&k).unwrap();
            let kept: Vec<Pred> = v.iter().enumerate().filter(|(j, _)| !bad.contains(j)).map(|(_, p)| p.clone()).collect();
            *v = kept;
            work.extend(readers.get(&k).into_iter().flatten().filter(|i| cs.clauses[**i].head_kvar().is_some()));
        }
    }

    let mut failing = Vec::new();
    let concrete: Vec<&Clause> = cs.clauses.iter().filter(|c| c.head_kvar().is_none()).collect();
    let tasks: Vec<Task> = concrete
        .iter()
        .enumerate()
        .map(|(i, c)| Ok(Task { clause: i, k: KVar(0), hyps: hyps(c, &sol)?, goals: vec![(0, sol.apply(&c.head)?)] }))
        .collect::<Result<_, SolveError>>()?;
    for (t, bad) in tasks.iter().zip(run_round(backends, &tasks, &mut stats.checks)?) {
        if !bad.is_empty() {
            failing.push(sol.apply_clause(concrete[t.clause])?);
        }
    }
    let out = if failing.is_empty() { Outcome::Sat(sol) } else { Outcome::Unsat(sol, failing) };
    Ok((out, stats))
}

/// Run independent tasks, one worker thread per backend.
fn run_round(backends: &mut [Box<dyn Backend>], tasks: &[Task], checks: &mut usize) -> Result<Vec<Vec<usize>>, SmtError> {
    if backends.len() <= 1 || tasks.len() <= 1 {
        let b = backends.first_mut().expect("at least one backend");
        return tasks.iter().map(|t| run_task(b.as_mut(), t, checks)).collect();
    }
    let n = backends.len();
    let results: Vec<Result<(Vec<(usize, Vec<usize>)>, usize), SmtError>> = std::thread::scope(|sc| {
        let handles: Vec<_> = backends
            .iter_mut()
            .enumerate()
            .map(|(w, b)| {
                sc.spawn(move || {
                    let mut out = Vec::new();
                    let mut n_checks = 0;
                    for (i, t) in tasks.iter().enumerate().filter(|(i, _)| i % n == w) {
                        out.push((i, run_task(b.as_mut(), t, &mut n_checks)?));
                    }
                    Ok((out, n_checks))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut all = vec![Vec::new(); tasks.len()];
    for r in results {
        let (part, c) = r?;
        *checks += c;
        for (i, bad) in part {
            all[i] = bad;
        }
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_qualifiers;

    fn scope(nu: Sort, vars: &[(&str, Sort)]) -> KScope {
        KScope {
            k: KVar(1),
            nu,
            vars: vars.iter().map(|(v, s)| (Var::new(*v), s.clone())).collect(),
            origin: String::new(),
        }
    }

    #[test]
    fn int_qualifiers_over_int_scope() {
        let q = parse_qualifiers("qualif Pos(v:int): 0 <= v\nqualif Eq(v:int): v = ~A:int").unwrap();
        let got = instantiate_quals(&q, &scope(Sort::Int, &[("x", Sort::Int), ("p", Sort::Ptr)]), &[]);
        let shown: Vec<String> = got.iter().map(|p| p.to_string()).collect();
        assert_eq!(shown, vec!["0 <= v", "v = x"]);
    }

    #[test]
    fn length_qualifier_over_snapshots() {
        let q = parse_qualifiers("qualif LenSucc(v:L): len(v) = 1 + len(~A:L)").unwrap();
        let ms = vec![Measure {
            name: "len".into(),
            ctor: "list".into(),
            param: Var::new("x"),
            sort: MeasSort::Int,
            null_case: Term::Int(0),
            rec_case: Term::Int(0),
        }];
        let sc = scope(Sort::Snap("list".into()), &[("x0", Sort::Snap("list".into())), ("k", Sort::Int)]);
        let got = instantiate_quals(&q, &sc, &ms);
        let shown: Vec<String> = got.iter().map(|p| p.to_string()).collect();
        assert_eq!(shown, vec!["len(v) = 1 + len(x0)"]);
    }

    #[test]
    fn no_qualifiers_no_instances() {
        assert!(instantiate_quals(&[], &scope(Sort::Int, &[("x", Sort::Int)]), &[]).is_empty());
    }

    #[test]
    fn applying_renames_pending() {
        let mut sol = Solution::default();
        let k = KVar(4);
        sol.0.insert(k, vec![Pred::eq(Term::meas("len", Term::nu()), Term::add(Term::Int(1), Term::meas("len", Term::var("x0"))))]);
        let p = Pred::K(k, KSubst::single(Var::new("x0"), Term::var("t0")));
        assert_eq!(sol.apply(&p).unwrap().to_string(), "len(v) = 1 + len(t0)");
        assert!(matches!(Solution::default().apply(&p), Err(SolveError::UnknownKappa(_))));
        let t = RType::int();
        assert_eq!(Solution::default().apply_rtype(&t).unwrap(), t);
    }
}
