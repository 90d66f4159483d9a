use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::names::{KVar, Loc, Var};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum AOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Rel {
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
}

impl Rel {
    pub fn negate(self) -> Rel {
        match self {
            Rel::Eq => Rel::Ne,
            Rel::Ne => Rel::Eq,
            Rel::Le => Rel::Gt,
            Rel::Lt => Rel::Ge,
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            Rel::Eq => a == b,
            Rel::Ne => a != b,
            Rel::Le => a <= b,
            Rel::Lt => a < b,
            Rel::Ge => a >= b,
            Rel::Gt => a > b,
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Int(i64),
    Null,
    Var(Var),
    Loc(Loc),
    /// `Field(value, f)`; in measure bodies this is written `x.f`.
    Field(Box<Term>, String),
    /// Measure application `m(t)`.
    Meas(String, Box<Term>),
    Bin(AOp, Box<Term>, Box<Term>),
    Ite(Box<Pred>, Box<Term>, Box<Term>),
}

/// Pending substitution carried by a κ application. Kept unexpanded until
/// the solver plugs in a candidate solution.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct KSubst(pub BTreeMap<Var, Term>);

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Pred {
    True,
    False,
    Rel(Rel, Term, Term),
    /// A boolean-sorted term used as an atom.
    BVar(Term),
    Not(Box<Pred>),
    And(Vec<Pred>),
    Or(Vec<Pred>),
    Imp(Box<Pred>, Box<Pred>),
    Iff(Box<Pred>, Box<Pred>),
    K(KVar, KSubst),
}

impl Term {
    pub fn var(s: &str) -> Term {
        Term::Var(Var::new(s))
    }

    pub fn nu() -> Term {
        Term::Var(Var::nu())
    }

    pub fn field(t: Term, f: &str) -> Term {
        Term::Field(Box::new(t), f.to_string())
    }

    pub fn meas(m: &str, t: Term) -> Term {
        Term::Meas(m.to_string(), Box::new(t))
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::Bin(AOp::Add, Box::new(a), Box::new(b))
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::Bin(AOp::Sub, Box::new(a), Box::new(b))
    }

    pub fn vars_into(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Int(_) | Term::Null | Term::Loc(_) => {}
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Field(t, _) | Term::Meas(_, t) => t.vars_into(out),
            Term::Bin(_, a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
            Term::Ite(c, a, b) => {
                c.vars_into(out);
                a.vars_into(out);
                b.vars_into(out);
            }
        }
    }

    pub fn locs_into(&self, out: &mut BTreeSet<Loc>) {
        match self {
            Term::Int(_) | Term::Null | Term::Var(_) => {}
            Term::Loc(l) => {
                out.insert(l.clone());
            }
            Term::Field(t, _) | Term::Meas(_, t) => t.locs_into(out),
            Term::Bin(_, a, b) => {
                a.locs_into(out);
                b.locs_into(out);
            }
            Term::Ite(c, a, b) => {
                c.locs_into(out);
                a.locs_into(out);
                b.locs_into(out);
            }
        }
    }

    pub fn mentions_measure(&self) -> bool {
        match self {
            Term::Meas(..) => true,
            Term::Int(_) | Term::Null | Term::Var(_) | Term::Loc(_) => false,
            Term::Field(t, _) => t.mentions_measure(),
            Term::Bin(_, a, b) => a.mentions_measure() || b.mentions_measure(),
            Term::Ite(c, a, b) => c.mentions_measure() || a.mentions_measure() || b.mentions_measure(),
        }
    }

    pub fn mentions_field(&self) -> bool {
        match self {
            Term::Field(..) => true,
            Term::Int(_) | Term::Null | Term::Var(_) | Term::Loc(_) => false,
            Term::Meas(_, t) => t.mentions_field(),
            Term::Bin(_, a, b) => a.mentions_field() || b.mentions_field(),
            Term::Ite(c, a, b) => c.mentions_field() || a.mentions_field() || b.mentions_field(),
        }
    }

    /// Replace every `Field(x, f)` whose base is the variable `x` by `g(f)`.
    pub fn map_fields_of(&self, x: &Var, g: &dyn Fn(&str) -> Term) -> Term {
        match self {
            Term::Field(b, f) if matches!(&**b, Term::Var(v) if v == x) => g(f),
            Term::Field(b, f) => Term::Field(Box::new(b.map_fields_of(x, g)), f.clone()),
            Term::Meas(m, t) => Term::Meas(m.clone(), Box::new(t.map_fields_of(x, g))),
            Term::Bin(o, a, b) => Term::Bin(*o, Box::new(a.map_fields_of(x, g)), Box::new(b.map_fields_of(x, g))),
            Term::Ite(c, a, b) => Term::Ite(
                Box::new(c.map_terms(&|t| t.map_fields_of(x, g))),
                Box::new(a.map_fields_of(x, g)),
                Box::new(b.map_fields_of(x, g)),
            ),
            t => t.clone(),
        }
    }

    pub fn subst(&self, s: &Subst) -> Term {
        match self {
            Term::Int(_) | Term::Null => self.clone(),
            Term::Var(v) => s.vars.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Loc(l) => {
                if s.null_locs.contains(l) {
                    Term::Null
                } else {
                    Term::Loc(s.locs.get(l).cloned().unwrap_or_else(|| l.clone()))
                }
            }
            Term::Field(t, f) => Term::Field(Box::new(t.subst(s)), f.clone()),
            Term::Meas(m, t) => Term::Meas(m.clone(), Box::new(t.subst(s))),
            Term::Bin(o, a, b) => Term::Bin(*o, Box::new(a.subst(s)), Box::new(b.subst(s))),
            Term::Ite(c, a, b) => Term::Ite(Box::new(c.subst(s)), Box::new(a.subst(s)), Box::new(b.subst(s))),
        }
    }

    /// Constant folding of `+`, `-`, `*` over literals and of `ite` on a
    /// decided condition.
    pub fn simplify(&self) -> Term {
        match self {
            Term::Bin(o, a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (&a, &b, o) {
                    (Term::Int(x), Term::Int(y), AOp::Add) => Term::Int(x.wrapping_add(*y)),
                    (Term::Int(x), Term::Int(y), AOp::Sub) => Term::Int(x.wrapping_sub(*y)),
                    (Term::Int(x), Term::Int(y), AOp::Mul) => Term::Int(x.wrapping_mul(*y)),
                    (_, Term::Int(0), AOp::Add | AOp::Sub) => a,
                    (Term::Int(0), _, AOp::Add) => b,
                    _ => Term::Bin(*o, Box::new(a), Box::new(b)),
                }
            }
            Term::Ite(c, a, b) => match c.simplify() {
                Pred::True => a.simplify(),
                Pred::False => b.simplify(),
                c => Term::Ite(Box::new(c), Box::new(a.simplify()), Box::new(b.simplify())),
            },
            Term::Field(t, f) => Term::Field(Box::new(t.simplify()), f.clone()),
            Term::Meas(m, t) => Term::Meas(m.clone(), Box::new(t.simplify())),
            t => t.clone(),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Term::Bin(AOp::Add | AOp::Sub, ..) => 1,
            Term::Bin(AOp::Mul, ..) => 2,
            Term::Int(n) if *n < 0 => 2,
            _ => 3,
        }
    }
}

impl KSubst {
    pub fn empty() -> KSubst {
        KSubst(BTreeMap::new())
    }

    pub fn single(v: Var, t: Term) -> KSubst {
        let mut m = BTreeMap::new();
        m.insert(v, t);
        KSubst(m)
    }

    /// Compose: first `self`, then `s`.
    pub fn then(&self, s: &Subst) -> KSubst {
        let mut out: BTreeMap<Var, Term> = self.0.iter().map(|(k, t)| (k.clone(), t.subst(s))).collect();
        for (k, t) in &s.vars {
            out.entry(k.clone()).or_insert_with(|| t.clone());
        }
        KSubst(out)
    }

    /// Keep only keys in `scope` (plus ν) and drop identity pairs.
    pub fn restrict(&self, scope: &BTreeSet<Var>) -> KSubst {
        KSubst(
            self.0
                .iter()
                .filter(|(k, t)| (k.is_nu() || scope.contains(*k)) && **t != Term::Var((*k).clone()))
                .map(|(k, t)| (k.clone(), t.clone()))
                .collect(),
        )
    }

    pub fn as_subst(&self) -> Subst {
        Subst { vars: self.0.clone(), ..Subst::default() }
    }
}

impl Pred {
    pub fn rel(r: Rel, a: Term, b: Term) -> Pred {
        Pred::Rel(r, a, b)
    }

    pub fn eq(a: Term, b: Term) -> Pred {
        Pred::Rel(Rel::Eq, a, b)
    }

    pub fn ne(a: Term, b: Term) -> Pred {
        Pred::Rel(Rel::Ne, a, b)
    }

    pub fn kapp(k: KVar) -> Pred {
        Pred::K(k, KSubst::empty())
    }

    pub fn not(p: Pred) -> Pred {
        match p {
            Pred::True => Pred::False,
            Pred::False => Pred::True,
            Pred::Not(q) => *q,
            p => Pred::Not(Box::new(p)),
        }
    }

    pub fn and(ps: impl IntoIterator<Item = Pred>) -> Pred {
        let mut out = Vec::new();
        for p in ps {
            match p {
                Pred::True => {}
                Pred::False => return Pred::False,
                Pred::And(qs) => out.extend(qs),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Pred::True,
            1 => out.pop().unwrap(),
            _ => Pred::And(out),
        }
    }

    pub fn or(ps: impl IntoIterator<Item = Pred>) -> Pred {
        let mut out = Vec::new();
        for p in ps {
            match p {
                Pred::False => {}
                Pred::True => return Pred::True,
                Pred::Or(qs) => out.extend(qs),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Pred::False,
            1 => out.pop().unwrap(),
            _ => Pred::Or(out),
        }
    }

    pub fn imp(a: Pred, b: Pred) -> Pred {
        match (a, b) {
            (Pred::True, b) => b,
            (Pred::False, _) | (_, Pred::True) => Pred::True,
            (a, b) => Pred::Imp(Box::new(a), Box::new(b)),
        }
    }

    pub fn iff(a: Pred, b: Pred) -> Pred {
        Pred::Iff(Box::new(a), Box::new(b))
    }

    pub fn conjuncts(&self) -> Vec<Pred> {
        match self {
            Pred::True => vec![],
            Pred::And(ps) => ps.iter().flat_map(|p| p.conjuncts()).collect(),
            p => vec![p.clone()],
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Pred::True)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        self.vars_into(&mut s);
        s
    }

    /// Free variables, not counting the implicit scope of κ applications.
    pub fn vars_into(&self, out: &mut BTreeSet<Var>) {
        match self {
            Pred::True | Pred::False => {}
            Pred::Rel(_, a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
            Pred::BVar(t) => t.vars_into(out),
            Pred::Not(p) => p.vars_into(out),
            Pred::And(ps) | Pred::Or(ps) => ps.iter().for_each(|p| p.vars_into(out)),
            Pred::Imp(a, b) | Pred::Iff(a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
            Pred::K(_, s) => s.0.values().for_each(|t| t.vars_into(out)),
        }
    }

    pub fn locs_into(&self, out: &mut BTreeSet<Loc>) {
        self.each_term(&mut |t| t.locs_into(out));
    }

    pub fn kvars(&self) -> BTreeSet<KVar> {
        let mut s = BTreeSet::new();
        self.kvars_into(&mut s);
        s
    }

    fn kvars_into(&self, out: &mut BTreeSet<KVar>) {
        match self {
            Pred::K(k, _) => {
                out.insert(*k);
            }
            Pred::Not(p) => p.kvars_into(out),
            Pred::And(ps) | Pred::Or(ps) => ps.iter().for_each(|p| p.kvars_into(out)),
            Pred::Imp(a, b) | Pred::Iff(a, b) => {
                a.kvars_into(out);
                b.kvars_into(out);
            }
            _ => {}
        }
    }

    pub fn has_kvar(&self) -> bool {
        !self.kvars().is_empty()
    }

    pub fn mentions_measure(&self) -> bool {
        let mut found = false;
        self.each_term(&mut |t| found |= t.mentions_measure());
        found
    }

    pub fn mentions_field(&self) -> bool {
        let mut found = false;
        self.each_term(&mut |t| found |= t.mentions_field());
        found
    }

    /// Visit every top-level term (including κ substitution ranges).
    pub fn each_term(&self, f: &mut dyn FnMut(&Term)) {
        match self {
            Pred::True | Pred::False => {}
            Pred::Rel(_, a, b) => {
                f(a);
                f(b);
            }
            Pred::BVar(t) => f(t),
            Pred::Not(p) => p.each_term(f),
            Pred::And(ps) | Pred::Or(ps) => ps.iter().for_each(|p| p.each_term(f)),
            Pred::Imp(a, b) | Pred::Iff(a, b) => {
                a.each_term(f);
                b.each_term(f);
            }
            Pred::K(_, s) => s.0.values().for_each(&mut *f),
        }
    }

    pub fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Pred {
        match self {
            Pred::True | Pred::False => self.clone(),
            Pred::Rel(r, a, b) => Pred::Rel(*r, f(a), f(b)),
            Pred::BVar(t) => Pred::BVar(f(t)),
            Pred::Not(p) => Pred::Not(Box::new(p.map_terms(f))),
            Pred::And(ps) => Pred::And(ps.iter().map(|p| p.map_terms(f)).collect()),
            Pred::Or(ps) => Pred::Or(ps.iter().map(|p| p.map_terms(f)).collect()),
            Pred::Imp(a, b) => Pred::Imp(Box::new(a.map_terms(f)), Box::new(b.map_terms(f))),
            Pred::Iff(a, b) => Pred::Iff(Box::new(a.map_terms(f)), Box::new(b.map_terms(f))),
            Pred::K(k, s) => Pred::K(*k, KSubst(s.0.iter().map(|(v, t)| (v.clone(), f(t))).collect())),
        }
    }

    /// Rewrite κ applications.
    pub fn map_kapps(&self, f: &dyn Fn(KVar, &KSubst) -> Pred) -> Pred {
        match self {
            Pred::K(k, s) => f(*k, s),
            Pred::Not(p) => Pred::not(p.map_kapps(f)),
            Pred::And(ps) => Pred::and(ps.iter().map(|p| p.map_kapps(f))),
            Pred::Or(ps) => Pred::or(ps.iter().map(|p| p.map_kapps(f))),
            Pred::Imp(a, b) => Pred::imp(a.map_kapps(f), b.map_kapps(f)),
            Pred::Iff(a, b) => Pred::iff(a.map_kapps(f), b.map_kapps(f)),
            p => p.clone(),
        }
    }

    pub fn subst(&self, s: &Subst) -> Pred {
        match self {
            Pred::K(k, ks) => Pred::K(*k, ks.then(s)),
            Pred::Not(p) => Pred::Not(Box::new(p.subst(s))),
            Pred::And(ps) => Pred::And(ps.iter().map(|p| p.subst(s)).collect()),
            Pred::Or(ps) => Pred::Or(ps.iter().map(|p| p.subst(s)).collect()),
            Pred::Imp(a, b) => Pred::Imp(Box::new(a.subst(s)), Box::new(b.subst(s))),
            Pred::Iff(a, b) => Pred::Iff(Box::new(a.subst(s)), Box::new(b.subst(s))),
            p => p.map_terms(&|t| t.subst(s)),
        }
    }

    /// Instantiate the value variable.
    pub fn at(&self, t: &Term) -> Pred {
        self.subst(&Subst::nu(t.clone()))
    }

    /// Light simplification: constant folding and decided comparisons.
    pub fn simplify(&self) -> Pred {
        match self {
            Pred::Rel(r, a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (&a, &b) {
                    (Term::Int(x), Term::Int(y)) => {
                        if r.holds(*x, *y) {
                            Pred::True
                        } else {
                            Pred::False
                        }
                    }
                    (Term::Null, Term::Null) if *r == Rel::Eq => Pred::True,
                    (Term::Null, Term::Null) if *r == Rel::Ne => Pred::False,
                    _ => Pred::Rel(*r, a, b),
                }
            }
            Pred::BVar(t) => Pred::BVar(t.simplify()),
            Pred::Not(p) => Pred::not(p.simplify()),
            Pred::And(ps) => Pred::and(ps.iter().map(|p| p.simplify())),
            Pred::Or(ps) => Pred::or(ps.iter().map(|p| p.simplify())),
            Pred::Imp(a, b) => Pred::imp(a.simplify(), b.simplify()),
            Pred::Iff(a, b) => match (a.simplify(), b.simplify()) {
                (Pred::True, q) | (q, Pred::True) => q,
                (Pred::False, q) | (q, Pred::False) => Pred::not(q),
                (a, b) => Pred::iff(a, b),
            },
            p => p.clone(),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Pred::Iff(..) => 1,
            Pred::Imp(..) => 2,
            Pred::Or(ps) if ps.len() > 1 => 3,
            Pred::And(ps) if ps.len() > 1 => 4,
            Pred::Not(_) => 5,
            _ => 6,
        }
    }
}

/// Capture-avoiding substitution over identifiers and locations.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Subst {
    pub vars: BTreeMap<Var, Term>,
    pub locs: BTreeMap<Loc, Loc>,
    /// Locations replaced by `null` inside terms (unmatched existentials).
    pub null_locs: BTreeSet<Loc>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn nu(t: Term) -> Subst {
        let mut s = Subst::default();
        s.vars.insert(Var::nu(), t);
        s
    }

    pub fn var(v: Var, t: Term) -> Subst {
        let mut s = Subst::default();
        s.vars.insert(v, t);
        s
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.locs.is_empty() && self.null_locs.is_empty()
    }

    pub fn loc(&self, l: &Loc) -> Loc {
        self.locs.get(l).cloned().unwrap_or_else(|| l.clone())
    }

    pub fn without_var(&self, v: &Var) -> Subst {
        let mut s = self.clone();
        s.vars.remove(v);
        s
    }

    pub fn range_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for t in self.vars.values() {
            t.vars_into(&mut out);
        }
        out
    }
}

impl fmt::Display for AOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AOp::Add => "+",
            AOp::Sub => "-",
            AOp::Mul => "*",
        })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(n) => write!(f, "{n}"),
            Term::Null => f.write_str("null"),
            Term::Var(v) => write!(f, "{v}"),
            Term::Loc(l) => write!(f, "&{l}"),
            Term::Field(t, name) => write!(f, "Field({t}, {name})"),
            Term::Meas(m, t) => write!(f, "{m}({t})"),
            Term::Bin(o, a, b) => {
                let p = self.prec();
                if a.prec() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {o} ")?;
                if b.prec() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Term::Ite(c, a, b) => write!(f, "ite({c}, {a}, {b})"),
        }
    }
}

impl fmt::Display for KSubst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let nu = self.0.iter().filter(|(k, _)| k.is_nu());
        let rest = self.0.iter().filter(|(k, _)| !k.is_nu());
        for (k, t) in nu.chain(rest) {
            if !first {
                f.write_str("; ")?;
            }
            first = false;
            write!(f, "{k}:={t}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, q: &Pred, min: u8| -> fmt::Result {
            if q.prec() < min {
                write!(f, "({q})")
            } else {
                write!(f, "{q}")
            }
        };
        match self {
            Pred::True => f.write_str("true"),
            Pred::False => f.write_str("false"),
            Pred::Rel(r, a, b) => write!(f, "{a} {} {b}", r.symbol()),
            Pred::BVar(t) => write!(f, "{t}"),
            Pred::Not(p) if matches!(**p, Pred::Rel(..)) => write!(f, "!({p})"),
            Pred::Not(p) => {
                f.write_str("!")?;
                wrap(f, p, 6)
            }
            Pred::And(ps) | Pred::Or(ps) => {
                let (sep, p) = if matches!(self, Pred::And(_)) { (" && ", 5) } else { (" || ", 4) };
                if ps.is_empty() {
                    return f.write_str(if matches!(self, Pred::And(_)) { "true" } else { "false" });
                }
                for (i, q) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    wrap(f, q, p)?;
                }
                Ok(())
            }
            Pred::Imp(a, b) => {
                wrap(f, a, 3)?;
                f.write_str(" => ")?;
                wrap(f, b, 2)
            }
            Pred::Iff(a, b) => {
                wrap(f, a, 2)?;
                f.write_str(" <=> ")?;
                wrap(f, b, 2)
            }
            Pred::K(k, s) => {
                if s.0.is_empty() {
                    write!(f, "{k}")
                } else {
                    write!(f, "{k}[{s}]")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replaces_variable() {
        let p = Pred::eq(Term::nu(), Term::var("x"));
        let q = p.subst(&Subst::var(Var::new("x"), Term::var("e")));
        assert_eq!(q.to_string(), "v = e");
    }

    #[test]
    fn kappa_keeps_pending_substitution() {
        let p = Pred::kapp(KVar(4));
        let q = p.subst(&Subst::var(Var::new("x0"), Term::var("t0")));
        assert_eq!(q.to_string(), "k4[x0:=t0]");
        let r = q.at(&Term::var("u0"));
        assert_eq!(r.to_string(), "k4[v:=u0; x0:=t0]");
    }

    #[test]
    fn pending_substitutions_compose_left_to_right() {
        let p = Pred::K(KVar(1), KSubst::single(Var::new("x"), Term::var("y")));
        let q = p.subst(&Subst::var(Var::new("y"), Term::var("z")));
        assert_eq!(q.to_string(), "k1[x:=z; y:=z]");
    }

    #[test]
    fn arithmetic_printing() {
        let t = Term::add(Term::Int(1), Term::meas("len", Term::var("t0")));
        assert_eq!(t.to_string(), "1 + len(t0)");
        let u = Term::sub(Term::var("a"), Term::add(Term::var("b"), Term::var("c")));
        assert_eq!(u.to_string(), "a - (b + c)");
    }

    #[test]
    fn folding_constants() {
        let t = Term::add(Term::Int(1), Term::Int(0));
        assert_eq!(t.simplify(), Term::Int(1));
        let p = Pred::eq(Term::var("x"), t);
        assert_eq!(p.simplify().to_string(), "x = 1");
    }
}
