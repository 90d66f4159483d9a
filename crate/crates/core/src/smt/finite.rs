use std::collections::{BTreeMap, BTreeSet};

use crate::model::{AOp, Pred, Term, Var};

use super::{Backend, SmtError, Validity};

/// Decides implications by enumerating every assignment of the free
/// variables over a small integer range (booleans over both values).
/// Only arithmetic over variables and literals is supported. Used as an
/// independent reference in tests.
#[derive(Clone, Debug)]
pub struct FiniteBackend {
    pub lo: i64,
    pub hi: i64,
    pub calls: usize,
}

impl FiniteBackend {
    pub fn new(lo: i64, hi: i64) -> FiniteBackend {
        FiniteBackend { lo, hi, calls: 0 }
    }
}

#[derive(Clone, Copy)]
enum Val {
    I(i64),
    B(bool),
}

fn bool_vars(p: &Pred, out: &mut BTreeSet<Var>) {
    match p {
        Pred::BVar(Term::Var(v)) => {
            out.insert(v.clone());
        }
        Pred::Not(q) => bool_vars(q, out),
        Pred::And(qs) | Pred::Or(qs) => qs.iter().for_each(|q| bool_vars(q, out)),
        Pred::Imp(a, b) | Pred::Iff(a, b) => {
            bool_vars(a, out);
            bool_vars(b, out)
        }
        _ => {}
    }
}

fn term(t: &Term, env: &BTreeMap<Var, Val>) -> Result<i64, SmtError> {
    Ok(match t {
        Term::Int(n) => *n,
        Term::Var(v) => match env.get(v) {
            Some(Val::I(n)) => *n,
            Some(Val::B(b)) => *b as i64,
            None => return Err(SmtError::Encode(format!("unbound {v}"))),
        },
        Term::Bin(o, a, b) => {
            let (a, b) = (term(a, env)?, term(b, env)?);
            match o {
                AOp::Add => a.wrapping_add(b),
                AOp::Sub => a.wrapping_sub(b),
                AOp::Mul => a.wrapping_mul(b),
            }
        }
        Term::Ite(c, a, b) => {
            if pred(c, env)? {
                term(a, env)?
            } else {
                term(b, env)?
            }
        }
        t => return Err(SmtError::Encode(format!("finite backend cannot evaluate {t}"))),
    })
}

fn pred(p: &Pred, env: &BTreeMap<Var, Val>) -> Result<bool, SmtError> {
    Ok(match p {
        Pred::True => true,
        Pred::False => false,
        Pred::Rel(r, a, b) => r.holds(term(a, env)?, term(b, env)?),
        Pred::BVar(t) => term(t, env)? != 0,
        Pred::Not(q) => !pred(q, env)?,
        Pred::And(qs) => {
            for q in qs {
                if !pred(q, env)? {
                    return Ok(false);
                }
            }
            true
        }
        Pred::Or(qs) => {
            for q in qs {
                if pred(q, env)? {
                    return Ok(true);
                }
            }
            false
        }
        Pred::Imp(a, b) => !pred(a, env)? || pred(b, env)?,
        Pred::Iff(a, b) => pred(a, env)? == pred(b, env)?,
        Pred::K(k, _) => return Err(SmtError::Encode(format!("unsolved {k}"))),
    })
}

impl Backend for FiniteBackend {
    fn check(&mut self, hyps: &[Pred], goal: &Pred) -> Result<Validity, SmtError> {
        self.calls += 1;
        let mut vars = BTreeSet::new();
        let mut bools = BTreeSet::new();
        for p in hyps.iter().chain(std::iter::once(goal)) {
            p.vars_into(&mut vars);
            bool_vars(p, &mut bools);
        }
        let vars: Vec<Var> = vars.into_iter().collect();
        let mut env = BTreeMap::new();
        let ok = enumerate(&vars, 0, &bools, self.lo, self.hi, &mut env, &mut |env| {
            for h in hyps {
                if !pred(h, env)? {
                    return Ok(true);
                }
            }
            pred(goal, env)
        })?;
        Ok(if ok { Validity::Valid } else { Validity::Invalid })
    }

    fn queries(&self) -> usize {
        self.calls
    }
}

/// Returns false as soon as `f` does.
fn enumerate(
    vars: &[Var],
    i: usize,
    bools: &BTreeSet<Var>,
    lo: i64,
    hi: i64,
    env: &mut BTreeMap<Var, Val>,
    f: &mut dyn FnMut(&BTreeMap<Var, Val>) -> Result<bool, SmtError>,
) -> Result<bool, SmtError> {
    if i == vars.len() {
        return f(env);
    }
    let v = &vars[i];
    let vals: Vec<Val> =
        if bools.contains(v) { vec![Val::B(false), Val::B(true)] } else { (lo..=hi).map(Val::I).collect() };
    for x in vals {
        env.insert(v.clone(), x);
        if !enumerate(vars, i + 1, bools, lo, hi, env, f)? {
            return Ok(false);
        }
    }
    env.remove(v);
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rel;

    #[test]
    fn abs_then_branch() {
        let mut b = FiniteBackend::new(-3, 3);
        let hyps = vec![Pred::rel(Rel::Le, Term::Int(0), Term::var("x")), Pred::eq(Term::nu(), Term::var("x"))];
        let goal = Pred::rel(Rel::Le, Term::Int(0), Term::nu());
        assert_eq!(b.check(&hyps, &goal).unwrap(), Validity::Valid);
        let bad = Pred::rel(Rel::Lt, Term::Int(0), Term::nu());
        assert_eq!(b.check(&hyps, &bad).unwrap(), Validity::Invalid);
    }
}
