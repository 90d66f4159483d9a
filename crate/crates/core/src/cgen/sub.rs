//! Subtyping, heap subtyping, pads, and the base-type matching used to
//! instantiate schemas and join branches.

use std::collections::{BTreeMap, BTreeSet};

use crate::frontend::print_rtype;
use crate::model::*;

use super::{anchor, CgenError, Engine, World};

fn show(b: &Base) -> String {
    print_rtype(&RType::plain(b.erase()))
}

/// `ν = s`, or `ν ⇔ s` at bool.
fn same(s: &Term, b: &Base) -> Pred {
    if matches!(b, Base::Bool) {
        Pred::iff(Pred::BVar(Term::nu()), Pred::BVar(s.clone()))
    } else {
        Pred::eq(Term::nu(), s.clone())
    }
}

fn same_fields(a: &[(String, RType)], b: &[(String, RType)]) -> bool {
    let na: BTreeSet<&String> = a.iter().map(|(f, _)| f).collect();
    let nb: BTreeSet<&String> = b.iter().map(|(f, _)| f).collect();
    a.len() == b.len() && na == nb
}

/// Least common shape of two erased bases, if any.
pub fn join_base(b1: &Base, b2: &Base) -> Option<Base> {
    Some(match (b1, b2) {
        (Base::Int, Base::Int) => Base::Int,
        (Base::Bool, Base::Bool) => Base::Bool,
        (Base::TyVar(a), Base::TyVar(b)) if a == b => Base::TyVar(a.clone()),
        (Base::Null, Base::Null) => Base::Null,
        (Base::Ref(l), Base::Ref(m)) if l == m => Base::Ref(l.clone()),
        (Base::Ref(l) | Base::MaybeRef(l), Base::Ref(m) | Base::MaybeRef(m)) if l == m => Base::MaybeRef(l.clone()),
        (Base::Null, Base::Ref(l) | Base::MaybeRef(l)) | (Base::Ref(l) | Base::MaybeRef(l), Base::Null) => {
            Base::MaybeRef(l.clone())
        }
        (Base::Record(fs), Base::Record(gs)) if same_fields(fs, gs) => {
            let mut out = Vec::new();
            for (f, t) in fs {
                let u = gs.iter().find(|(g, _)| g == f)?;
                out.push((f.clone(), RType::plain(join_base(&t.base, &u.1.base)?)));
            }
            Base::Record(out)
        }
        (Base::App(c, xs), Base::App(d, ys)) if c == d && xs.len() == ys.len() => {
            let mut out = Vec::new();
            for (x, y) in xs.iter().zip(ys) {
                out.push(RType::plain(join_base(&x.base, &y.base)?));
            }
            Base::App(c.clone(), out)
        }
        _ => return None,
    })
}

/// First-order matching of a formal base against an actual one, binding
/// quantified locations and type variables. Existing bindings win.
pub fn unify_base(
    formal: &Base,
    actual: &Base,
    quantified: &BTreeSet<Loc>,
    locs: &mut BTreeMap<Loc, Loc>,
    tvs: &mut BTreeMap<String, Base>,
) {
    match (formal, actual) {
        (Base::TyVar(a), b) => {
            tvs.entry(a.clone()).or_insert_with(|| b.erase());
        }
        (Base::Ref(l) | Base::MaybeRef(l), Base::Ref(m) | Base::MaybeRef(m)) if quantified.contains(l) => {
            locs.entry(l.clone()).or_insert_with(|| m.clone());
        }
        (Base::Record(fs), Base::Record(_)) => {
            for (f, t) in fs {
                if let Some(u) = actual.field(f) {
                    unify_base(&t.base, &u.base, quantified, locs, tvs);
                }
            }
        }
        (Base::App(c, xs), Base::App(d, ys)) if c == d => {
            for (x, y) in xs.iter().zip(ys) {
                unify_base(&x.base, &y.base, quantified, locs, tvs);
            }
        }
        _ => {}
    }
}

impl Engine<'_> {
    /// Extra head conjuncts of `b1 <: b2`, or a physical mismatch.
    pub(crate) fn obligations(&self, b1: &Base, b2: &Base) -> Result<Pred, CgenError> {
        let nu = Term::nu();
        let ok = match (b1, b2) {
            (Base::Int, Base::Int) | (Base::Bool, Base::Bool) | (Base::Null, Base::Null) => Some(Pred::True),
            (Base::TyVar(a), Base::TyVar(b)) if a == b => Some(Pred::True),
            (Base::Null, Base::MaybeRef(l)) => Some(Pred::eq(nu, Term::Loc(l.clone()))),
            (Base::Ref(l), Base::Ref(m) | Base::MaybeRef(m)) | (Base::MaybeRef(l), Base::MaybeRef(m)) if l == m => {
                Some(Pred::True)
            }
            (Base::MaybeRef(l), Base::Ref(m)) if l == m => Some(Pred::ne(nu, Term::Null)),
            (Base::Record(fs), Base::Record(gs)) if same_fields(fs, gs) => Some(Pred::True),
            (Base::App(c, xs), Base::App(d, ys)) if c == d && xs.len() == ys.len() => Some(Pred::True),
            _ => None,
        };
        ok.ok_or_else(|| self.err(format!("type mismatch: expected {}, found {}", show(b2), show(b1))))
    }

    /// `w ∧ extra ⊢ t1 <: t2`, for a value `subj` of type `t1` when known.
    /// Applications and records are covariant in their components.
    pub(crate) fn sub(
        &mut self,
        w: &World,
        extra: &[Pred],
        subj: Option<&Term>,
        t1: &RType,
        t2: &RType,
        rule: &str,
    ) -> Result<(), CgenError> {
        let oblig = self.obligations(&t1.base, &t2.base)?;
        if self.refined() {
            let nu = Term::nu();
            let body = match subj {
                Some(s @ Term::Var(v)) if w.knows(v) => same(s, &t1.base),
                _ => Pred::and([
                    t1.pred.clone(),
                    anchor(&nu, &t1.base),
                    subj.map(|s| same(s, &t1.base)).unwrap_or(Pred::True),
                ]),
            };
            let head = Pred::and([t2.pred.clone(), oblig]);
            self.emit(w, extra, body, head, Sort::of_base(&t2.base), rule);
        }
        match (&t1.base, &t2.base) {
            (Base::App(_, xs), Base::App(_, ys)) => {
                for (x, y) in xs.iter().zip(ys) {
                    self.sub(w, extra, None, x, y, rule)?;
                }
            }
            (Base::Record(fs), Base::Record(gs)) => {
                for (f, g) in gs {
                    let ft = &fs.iter().find(|(n, _)| n == f).expect("fields checked").1;
                    let s = subj.map(|s| Term::field(s.clone(), f));
                    self.sub(w, extra, s.as_ref(), ft, g, rule)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `w.heap ⪯ target` on the target's domain, after renaming the
    /// target's binders to the actual ones. Identical entries are skipped.
    pub(crate) fn heap_sub(&mut self, w: &World, target: &Heap, rule: &str) -> Result<(), CgenError> {
        let mut th = Subst::new();
        for b2 in &target.0 {
            if let Some(b1) = w.heap.get(&b2.loc) {
                th.vars.insert(b2.binder.clone(), Term::Var(b1.binder.clone()));
            }
        }
        let target = target.subst(&th);
        for b2 in &target.0 {
            let b1 = w
                .heap
                .get(&b2.loc)
                .ok_or_else(|| self.err(format!("location {} is missing from the heap", b2.loc)))?
                .clone();
            if &b1 == b2 {
                continue;
            }
            if matches!(b1.ty.base, Base::Record(_)) && matches!(b2.ty.base, Base::App(..)) {
                return Err(self.err(format!("location {} is unfolded here but must be folded", b2.loc)));
            }
            let extra = if matches!(b1.ty.base, Base::App(..)) {
                vec![]
            } else {
                vec![Pred::ne(Term::Loc(b1.loc.clone()), Term::Null)]
            };
            self.sub(w, &extra, Some(&Term::Var(b1.binder.clone())), &b1.ty, &b2.ty, rule)?;
        }
        Ok(())
    }

    /// Give a padded location a κ-templated type shaped like `like`. A
    /// structure pad must admit the null snapshot.
    pub(crate) fn materialize(&mut self, w: &mut World, l: &Loc, like: &Base) {
        if !w.is_pad(l) {
            return;
        }
        let scope = w.scope();
        let ty = self.template(&like.erase(), &scope, &format!("pad {l}"));
        if matches!(ty.base, Base::App(..)) {
            let nu_sort = Sort::of_base(&ty.base);
            self.emit(w, &[], Pred::eq(Term::nu(), Term::Null), ty.pred.clone(), nu_sort, "pad");
        }
        w.pads.remove(l);
        if let Some(b) = w.heap.get_mut(l) {
            b.ty = ty;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joins_of_pointers() {
        let l = Loc::new("l");
        assert_eq!(join_base(&Base::Null, &Base::Ref(l.clone())), Some(Base::MaybeRef(l.clone())));
        assert_eq!(join_base(&Base::Ref(l.clone()), &Base::Ref(l.clone())), Some(Base::Ref(l.clone())));
        assert_eq!(join_base(&Base::Ref(l), &Base::Ref(Loc::new("m"))), None);
        assert_eq!(join_base(&Base::Int, &Base::Bool), None);
    }

    #[test]
    fn unification_binds_quantified_only() {
        let (l, m) = (Loc::new("l"), Loc::new("m"));
        let q: BTreeSet<Loc> = [l.clone()].into();
        let mut locs = BTreeMap::new();
        let mut tvs = BTreeMap::new();
        let formal = Base::Record(vec![
            ("a".into(), RType::plain(Base::Ref(l.clone()))),
            ("b".into(), RType::plain(Base::TyVar("A".into()))),
        ]);
        let actual = Base::Record(vec![
            ("a".into(), RType::plain(Base::MaybeRef(m.clone()))),
            ("b".into(), RType::int()),
        ]);
        unify_base(&formal, &actual, &q, &mut locs, &mut tvs);
        assert_eq!(locs.get(&l), Some(&m));
        assert_eq!(tvs.get("A"), Some(&Base::Int));
        let mut locs2 = BTreeMap::new();
        unify_base(&Base::Ref(m.clone()), &Base::Ref(l), &q, &mut locs2, &mut tvs);
        assert!(locs2.is_empty());
    }
}
