use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::names::{KVar, Var};
use super::pred::{Pred, Subst, Term};
use super::stmt::Span;
use super::types::Sort;

/// Where a clause came from.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Default)]
pub struct Prov {
    pub func: String,
    pub rule: String,
    pub span: Span,
    pub note: String,
}

impl fmt::Display for Prov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} at {}", self.func, self.rule, self.span)?;
        if !self.note.is_empty() {
            write!(f, " ({})", self.note)?;
        }
        Ok(())
    }
}

/// `env |- body => head` with at most one κ in the head.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Clause {
    pub id: usize,
    pub env: Vec<Pred>,
    pub body: Pred,
    pub head: Pred,
    pub nu_sort: Sort,
    pub prov: Prov,
}

impl Clause {
    pub fn head_kvar(&self) -> Option<crate::model::KVar> {
        match &self.head {
            Pred::K(k, _) => Some(*k),
            _ => None,
        }
    }

    pub fn hyp_kvars(&self) -> BTreeSet<KVar> {
        let mut s = BTreeSet::new();
        for p in self.env.iter().chain(std::iter::once(&self.body)) {
            s.extend(p.kvars());
        }
        s
    }

    pub fn is_concrete(&self) -> bool {
        !self.head.has_kvar()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.env.is_empty() {
            f.write_str("true")?;
        } else {
            for (i, p) in self.env.iter().enumerate() {
                if i > 0 {
                    f.write_str("; ")?;
                }
                write!(f, "{p}")?;
            }
        }
        write!(f, " |- {} => {}", self.body, self.head)
    }
}

fn term_vars_ordered(t: &Term, out: &mut Vec<Var>) {
    match t {
        Term::Var(v) if !out.contains(v) => out.push(v.clone()),
        Term::Field(e, _) | Term::Meas(_, e) => term_vars_ordered(e, out),
        Term::Bin(_, a, b) => {
            term_vars_ordered(a, out);
            term_vars_ordered(b, out);
        }
        Term::Ite(c, a, b) => {
            pred_names_ordered(c, out, &mut Vec::new());
            term_vars_ordered(a, out);
            term_vars_ordered(b, out);
        }
        _ => {}
    }
}

fn pred_names_ordered(p: &Pred, vars: &mut Vec<Var>, ks: &mut Vec<KVar>) {
    match p {
        Pred::K(k, _) if !ks.contains(k) => ks.push(*k),
        Pred::Not(q) => pred_names_ordered(q, vars, ks),
        Pred::And(qs) | Pred::Or(qs) => qs.iter().for_each(|q| pred_names_ordered(q, vars, ks)),
        Pred::Imp(a, b) | Pred::Iff(a, b) => {
            pred_names_ordered(a, vars, ks);
            pred_names_ordered(b, vars, ks);
        }
        _ => {}
    }
    if !matches!(p, Pred::Not(_) | Pred::And(_) | Pred::Or(_) | Pred::Imp(..) | Pred::Iff(..)) {
        p.each_term(&mut |t| term_vars_ordered(t, vars));
    }
}

impl Clause {
    /// The hypotheses accepted by `keep`, then body and head, with
    /// variables renamed `a1, a2, ...` in order of first occurrence. κs
    /// are renamed through `kmap`, extending it as new ones appear, so a
    /// list of clauses can share one numbering. `v` and the formals
    /// inside pending substitutions are left alone.
    pub fn canonical(&self, keep: &dyn Fn(&Pred) -> bool, kmap: &mut BTreeMap<KVar, KVar>) -> String {
        let hyps: Vec<&Pred> = self.env.iter().filter(|p| keep(p)).collect();
        let (mut vars, mut ks) = (Vec::new(), Vec::new());
        for p in hyps.iter().copied().chain([&self.body, &self.head]) {
            pred_names_ordered(p, &mut vars, &mut ks);
        }
        let mut s = Subst::new();
        for (i, v) in vars.iter().filter(|v| !v.is_nu()).enumerate() {
            s.vars.insert(v.clone(), Term::Var(Var::new(format!("a{}", i + 1))));
        }
        for k in ks {
            let n = KVar(kmap.len() as u32 + 1);
            kmap.entry(k).or_insert(n);
        }
        let show = |p: &Pred| p.map_terms(&|t| t.subst(&s)).map_kapps(&|k, ks| Pred::K(kmap[&k], ks.clone())).to_string();
        let env: Vec<String> = hyps.iter().map(|p| show(p)).collect();
        let env = if env.is_empty() { "true".to_string() } else { env.join("; ") };
        format!("{env} |- {} => {}", show(&self.body), show(&self.head))
    }
}

/// One line per clause, keeping the hypotheses that mention a κ or a
/// measure; κs numbered across the whole list.
pub fn projection(cs: &[&Clause]) -> String {
    let mut kmap = BTreeMap::new();
    let mut out = String::new();
    for c in cs {
        out.push_str(&c.canonical(&|p| p.has_kvar() || p.mentions_measure(), &mut kmap));
        out.push('\n');
    }
    out
}

/// Well-formedness side condition for a κ: the symbols its solution may
/// mention, with their sorts.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KScope {
    pub k: KVar,
    pub nu: Sort,
    pub vars: Vec<(Var, Sort)>,
    pub origin: String,
}

impl KScope {
    pub fn var_set(&self) -> BTreeSet<Var> {
        self.vars.iter().map(|(v, _)| v.clone()).collect()
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ConstraintSet {
    pub clauses: Vec<Clause>,
    pub scopes: BTreeMap<KVar, KScope>,
}

impl ConstraintSet {
    pub fn new() -> ConstraintSet {
        ConstraintSet::default()
    }

    /// Associative merge; clause ids are renumbered in order.
    pub fn merge(&mut self, other: ConstraintSet) {
        for mut c in other.clauses {
            c.id = self.clauses.len();
            self.clauses.push(c);
        }
        self.scopes.extend(other.scopes);
    }

    pub fn push(&mut self, mut c: Clause) {
        c.id = self.clauses.len();
        self.clauses.push(c);
    }

    /// One clause per line in the `env |- lhs => head` form.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for c in &self.clauses {
            s.push_str(&format!("{c}    # {}\n", c.prov));
        }
        s
    }
}
