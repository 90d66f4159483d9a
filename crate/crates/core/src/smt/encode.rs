use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::model::{AOp, Loc, MeasSort, Pred, Rel, Term, Var};

use super::{SmtError, Theory};

/// SMT-LIB symbols that must not be used for program names.
const RESERVED: &[&str] = &[
    "nu", "null", "Field", "true", "false", "and", "or", "not", "ite", "distinct", "let", "forall", "exists", "match",
    "as", "par", "abs", "div", "mod", "to_real", "to_int", "is_int", "Int", "Bool", "Real",
];

fn plain(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn var_symbol(v: &Var) -> String {
    if v.is_nu() {
        return "nu".into();
    }
    if plain(&v.0) && !RESERVED.contains(&v.0.as_str()) {
        v.0.clone()
    } else {
        let safe: String = v.0.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '!' }).collect();
        format!("v!{safe}")
    }
}

pub fn field_symbol(f: &str) -> String {
    format!("f!{f}")
}

pub fn measure_symbol(m: &str) -> String {
    format!("m!{m}")
}

pub fn loc_symbol(l: &Loc) -> String {
    let safe: String = l.0.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '!' }).collect();
    format!("loc!{safe}")
}

/// Symbols and sorts needed by one query.
pub struct Encoder<'a> {
    pub theory: &'a Theory,
    pub bools: BTreeSet<Var>,
    pub vars: BTreeSet<Var>,
    pub locs: BTreeSet<Loc>,
    pub fields: BTreeSet<String>,
    pub measures: BTreeSet<String>,
}

impl<'a> Encoder<'a> {
    pub fn new(theory: &'a Theory, preds: &[&Pred]) -> Encoder<'a> {
        let mut e = Encoder {
            theory,
            bools: BTreeSet::new(),
            vars: BTreeSet::new(),
            locs: BTreeSet::new(),
            fields: BTreeSet::new(),
            measures: BTreeSet::new(),
        };
        for p in preds {
            p.vars_into(&mut e.vars);
            p.locs_into(&mut e.locs);
            p.each_term(&mut |t| collect_syms(t, &mut e.fields, &mut e.measures));
        }
        e.infer_bools(preds);
        e
    }

    fn term_is_bool(&self, t: &Term) -> bool {
        match t {
            Term::Var(v) => self.bools.contains(v),
            Term::Meas(m, _) => self.theory.measure_sort(m) == Some(MeasSort::Bool),
            _ => false,
        }
    }

    fn infer_bools(&mut self, preds: &[&Pred]) {
        fn atoms<'p>(p: &'p Pred, out: &mut Vec<&'p Pred>) {
            match p {
                Pred::Not(q) => atoms(q, out),
                Pred::And(qs) | Pred::Or(qs) => qs.iter().for_each(|q| atoms(q, out)),
                Pred::Imp(a, b) | Pred::Iff(a, b) => {
                    atoms(a, out);
                    atoms(b, out)
                }
                p => out.push(p),
            }
        }
        let mut all = Vec::new();
        for p in preds {
            atoms(p, &mut all);
        }
        for a in &all {
            if let Pred::BVar(Term::Var(v)) = a {
                self.bools.insert(v.clone());
            }
        }
        loop {
            let mut changed = false;
            for a in &all {
                if let Pred::Rel(Rel::Eq | Rel::Ne, x, y) = a {
                    for (p, q) in [(x, y), (y, x)] {
                        if let Term::Var(v) = q {
                            if self.term_is_bool(p) && !self.bools.contains(v) {
                                self.bools.insert(v.clone());
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Declarations for the query-local symbols.
    pub fn declarations(&self) -> String {
        let mut s = String::new();
        for v in &self.vars {
            let sort = if self.bools.contains(v) { "Bool" } else { "Int" };
            let _ = writeln!(s, "(declare-const {} {sort})", var_symbol(v));
        }
        for l in &self.locs {
            let _ = writeln!(s, "(declare-const {} Int)", loc_symbol(l));
        }
        let extra: Vec<&String> = self.fields.iter().filter(|f| !self.theory.fields.contains(*f)).collect();
        for f in &extra {
            let _ = writeln!(s, "(declare-const {} Int)", field_symbol(f));
        }
        if !extra.is_empty() {
            let all: Vec<String> = self.theory.fields.iter().chain(extra.iter().copied()).map(|f| field_symbol(f)).collect();
            if all.len() > 1 {
                let _ = writeln!(s, "(assert (distinct {}))", all.join(" "));
            }
        }
        for m in &self.measures {
            if self.theory.measure_sort(m).is_none() {
                let _ = writeln!(s, "(declare-fun {} (Int) Int)", measure_symbol(m));
            }
        }
        s
    }

    pub fn term(&self, t: &Term) -> Result<String, SmtError> {
        Ok(match t {
            Term::Int(n) if *n < 0 => format!("(- {})", n.unsigned_abs()),
            Term::Int(n) => n.to_string(),
            Term::Null => "null".into(),
            Term::Var(v) => var_symbol(v),
            Term::Loc(l) => loc_symbol(l),
            Term::Field(a, f) => format!("(Field {} {})", self.term(a)?, field_symbol(f)),
            Term::Meas(m, a) => format!("({} {})", measure_symbol(m), self.term(a)?),
            Term::Bin(o, a, b) => {
                let op = match o {
                    AOp::Add => "+",
                    AOp::Sub => "-",
                    AOp::Mul => "*",
                };
                format!("({op} {} {})", self.term(a)?, self.term(b)?)
            }
            Term::Ite(c, a, b) => format!("(ite {} {} {})", self.pred(c)?, self.term(a)?, self.term(b)?),
        })
    }

    pub fn pred(&self, p: &Pred) -> Result<String, SmtError> {
        Ok(match p {
            Pred::True => "true".into(),
            Pred::False => "false".into(),
            Pred::Rel(r, a, b) => {
                let (a, b) = (self.term(a)?, self.term(b)?);
                match r {
                    Rel::Eq => format!("(= {a} {b})"),
                    Rel::Ne => format!("(not (= {a} {b}))"),
                    Rel::Le => format!("(<= {a} {b})"),
                    Rel::Lt => format!("(< {a} {b})"),
                    Rel::Ge => format!("(>= {a} {b})"),
                    Rel::Gt => format!("(> {a} {b})"),
                }
            }
            Pred::BVar(t) => {
                if self.term_is_bool(t) {
                    self.term(t)?
                } else {
                    format!("(not (= {} 0))", self.term(t)?)
                }
            }
            Pred::Not(q) => format!("(not {})", self.pred(q)?),
            Pred::And(qs) if qs.is_empty() => "true".into(),
            Pred::Or(qs) if qs.is_empty() => "false".into(),
            Pred::And(qs) | Pred::Or(qs) => {
                let op = if matches!(p, Pred::And(_)) { "and" } else { "or" };
                let parts: Result<Vec<String>, SmtError> = qs.iter().map(|q| self.pred(q)).collect();
                format!("({op} {})", parts?.join(" "))
            }
            Pred::Imp(a, b) => format!("(=> {} {})", self.pred(a)?, self.pred(b)?),
            Pred::Iff(a, b) => format!("(= {} {})", self.pred(a)?, self.pred(b)?),
            Pred::K(k, _) => return Err(SmtError::Encode(format!("unsolved {k} in query"))),
        })
    }
}

fn collect_syms(t: &Term, fields: &mut BTreeSet<String>, measures: &mut BTreeSet<String>) {
    match t {
        Term::Field(a, f) => {
            fields.insert(f.clone());
            collect_syms(a, fields, measures)
        }
        Term::Meas(m, a) => {
            measures.insert(m.clone());
            collect_syms(a, fields, measures)
        }
        Term::Bin(_, a, b) => {
            collect_syms(a, fields, measures);
            collect_syms(b, fields, measures)
        }
        Term::Ite(c, a, b) => {
            c.each_term(&mut |t| collect_syms(t, fields, measures));
            collect_syms(a, fields, measures);
            collect_syms(b, fields, measures)
        }
        _ => {}
    }
}

/// Encode a single predicate with sorts inferred from itself.
pub fn encode_pred(theory: &Theory, p: &Pred) -> Result<String, SmtError> {
    Encoder::new(theory, &[p]).pred(p)
}

/// Declarations shared by every query of a session.
pub fn preamble(theory: &Theory, timeout_ms: u64) -> Result<String, SmtError> {
    let mut s = String::new();
    let _ = writeln!(s, "(set-option :print-success false)");
    let _ = writeln!(s, "(set-option :timeout {timeout_ms})");
    let _ = writeln!(s, "(set-logic QF_UFLIA)");
    let _ = writeln!(s, "(declare-const null Int)");
    let _ = writeln!(s, "(declare-fun Field (Int Int) Int)");
    for f in &theory.fields {
        let _ = writeln!(s, "(declare-const {} Int)", field_symbol(f));
    }
    if theory.fields.len() > 1 {
        let all: Vec<String> = theory.fields.iter().map(|f| field_symbol(f)).collect();
        let _ = writeln!(s, "(assert (distinct {}))", all.join(" "));
    }
    for m in &theory.measures {
        let sort = match m.sort {
            MeasSort::Int => "Int",
            MeasSort::Bool => "Bool",
        };
        let _ = writeln!(s, "(declare-fun {} (Int) {sort})", measure_symbol(&m.name));
    }
    let enc = Encoder::new(theory, &[]);
    for m in &theory.measures {
        let c = enc.term(&m.null_case)?;
        let _ = writeln!(s, "(assert (= ({} null) {c}))", measure_symbol(&m.name));
    }
    Ok(s)
}

/// The push/pop block for one validity query.
pub fn query_block(theory: &Theory, hyps: &[Pred], goal: &Pred) -> Result<String, SmtError> {
    let mut all: Vec<&Pred> = hyps.iter().collect();
    all.push(goal);
    let enc = Encoder::new(theory, &all);
    let mut s = String::from("(push 1)\n");
    s.push_str(&enc.declarations());
    for h in hyps {
        let _ = writeln!(s, "(assert {})", enc.pred(h)?);
    }
    let _ = writeln!(s, "(assert (not {}))", enc.pred(goal)?);
    s.push_str("(check-sat)\n(pop 1)\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th() -> Theory {
        Theory {
            fields: ["data".to_string(), "next".to_string()].into_iter().collect(),
            measures: vec![super::super::MeasureDecl { name: "len".into(), sort: MeasSort::Int, null_case: Term::Int(0) }],
        }
    }

    #[test]
    fn comparison_over_value() {
        let p = Pred::rel(Rel::Le, Term::Int(0), Term::nu());
        assert_eq!(encode_pred(&th(), &p).unwrap(), "(<= 0 nu)");
    }

    #[test]
    fn field_is_uninterpreted() {
        let p = Pred::eq(Term::var("d"), Term::field(Term::nu(), "data"));
        assert_eq!(encode_pred(&th(), &p).unwrap(), "(= d (Field nu f!data))");
    }

    #[test]
    fn measure_applied_twice() {
        let p = Pred::eq(Term::meas("len", Term::var("x0")), Term::add(Term::Int(1), Term::meas("len", Term::var("t0"))));
        assert_eq!(encode_pred(&th(), &p).unwrap(), "(= (m!len x0) (+ 1 (m!len t0)))");
    }

    #[test]
    fn odd_names_are_mangled() {
        assert_eq!(var_symbol(&Var::new("x'1")), "v!x!1");
        assert_eq!(var_symbol(&Var::new("null")), "v!null");
        assert_eq!(var_symbol(&Var::new("_t1")), "_t1");
    }

    #[test]
    fn booleans_are_native() {
        let p = Pred::iff(Pred::BVar(Term::nu()), Pred::rel(Rel::Lt, Term::var("a"), Term::var("b")));
        let t = th();
        let e = Encoder::new(&t, &[&p]);
        assert!(e.declarations().contains("(declare-const nu Bool)"));
        assert_eq!(e.pred(&p).unwrap(), "(= nu (< a b))");
    }

    #[test]
    fn kappa_cannot_be_encoded() {
        assert!(encode_pred(&th(), &Pred::kapp(crate::model::KVar(1))).is_err());
    }
}
