//! Well-formedness of types, heaps, type definitions, measures and schemas.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct WfError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, WfError> {
    Err(WfError(msg.into()))
}

pub type SortEnv = BTreeMap<Var, Sort>;

/// Coarse classes used for comparisons: the logic only distinguishes
/// integers (and type variables, which are compared like integers),
/// booleans, and everything pointer-like.
#[derive(PartialEq, Eq, Debug, Clone, Copy)]
enum Class {
    Num,
    Bool,
    Ref,
}

fn class(s: &Sort) -> Class {
    match s {
        Sort::Int | Sort::TyVar(_) => Class::Num,
        Sort::Bool => Class::Bool,
        _ => Class::Ref,
    }
}

/// Checks against a fixed set of type definitions and measures.
#[derive(Clone, Copy)]
pub struct Checker<'a> {
    pub defs: &'a [TypeDef],
    pub measures: &'a [Measure],
}

impl<'a> Checker<'a> {
    pub fn new(defs: &'a [TypeDef], measures: &'a [Measure]) -> Checker<'a> {
        Checker { defs, measures }
    }

    fn def(&self, c: &str) -> Option<&'a TypeDef> {
        self.defs.iter().find(|d| d.name == c)
    }

    /// Sort of a term, or an error naming the offending symbol.
    pub fn sort_of(&self, env: &SortEnv, t: &Term) -> Result<Sort, WfError> {
        match t {
            Term::Int(_) => Ok(Sort::Int),
            Term::Null | Term::Loc(_) => Ok(Sort::Ptr),
            Term::Var(v) => env.get(v).cloned().ok_or_else(|| WfError(format!("unbound symbol `{v}`"))),
            Term::Field(b, f) => match self.sort_of(env, b)? {
                Sort::Rec(fs) => match fs.iter().find(|(n, _)| n == f) {
                    Some((_, s)) => Ok(s.clone()),
                    None => err(format!("record has no field `{f}`")),
                },
                Sort::Snap(c) => match self.def(&c).and_then(|d| d.root_ty.base.field(f)) {
                    Some(ft) => Ok(Sort::of_base(&ft.base)),
                    None => err(format!("`{c}` has no field `{f}`")),
                },
                s => err(format!("field `{f}` projected from a value of sort {s}")),
            },
            Term::Meas(m, a) => {
                let Some(meas) = self.measures.iter().find(|x| &x.name == m) else {
                    return err(format!("unknown measure `{m}`"));
                };
                let s = self.sort_of(env, a)?;
                let ok = match &s {
                    Sort::Snap(c) => c == &meas.ctor,
                    Sort::Ptr | Sort::OrNull(_) => true,
                    _ => false,
                };
                if !ok {
                    return err(format!("measure `{m}` over `{}` applied to a value of sort {s}", meas.ctor));
                }
                Ok(match meas.sort {
                    MeasSort::Int => Sort::Int,
                    MeasSort::Bool => Sort::Bool,
                })
            }
            Term::Bin(_, a, b) => {
                for x in [a, b] {
                    let s = self.sort_of(env, x)?;
                    if class(&s) != Class::Num {
                        return err(format!("arithmetic on `{x}` of sort {s}"));
                    }
                }
                Ok(Sort::Int)
            }
            Term::Ite(c, a, b) => {
                self.check_pred(env, c)?;
                let (sa, sb) = (self.sort_of(env, a)?, self.sort_of(env, b)?);
                if class(&sa) != class(&sb) {
                    return err(format!("branches of `{t}` have sorts {sa} and {sb}"));
                }
                Ok(sa)
            }
        }
    }

    /// Every symbol bound and every atom well-sorted.
    pub fn check_pred(&self, env: &SortEnv, p: &Pred) -> Result<(), WfError> {
        match p {
            Pred::True | Pred::False | Pred::K(..) => Ok(()),
            Pred::Rel(r, a, b) => {
                let (sa, sb) = (self.sort_of(env, a)?, self.sort_of(env, b)?);
                let (ca, cb) = (class(&sa), class(&sb));
                let ok = match r {
                    Rel::Eq | Rel::Ne => ca == cb,
                    _ => ca == Class::Num && cb == Class::Num,
                };
                if ok {
                    Ok(())
                } else {
                    err(format!("sort mismatch in `{p}`: {sa} vs {sb}"))
                }
            }
            Pred::BVar(t) => match self.sort_of(env, t)? {
                Sort::Bool => Ok(()),
                s => err(format!("`{t}` of sort {s} used as a proposition")),
            },
            Pred::Not(q) => self.check_pred(env, q),
            Pred::And(qs) | Pred::Or(qs) => qs.iter().try_for_each(|q| self.check_pred(env, q)),
            Pred::Imp(a, b) | Pred::Iff(a, b) => {
                self.check_pred(env, a)?;
                self.check_pred(env, b)
            }
        }
    }

    fn check_base(&self, env: &SortEnv, tvars: Option<&[String]>, b: &Base) -> Result<(), WfError> {
        match b {
            Base::TyVar(a) => match tvars {
                Some(vs) if !vs.contains(a) => err(format!("type variable `{a}` is not declared")),
                _ => Ok(()),
            },
            Base::Record(fs) => {
                let mut seen = BTreeSet::new();
                for (f, t) in fs {
                    if !seen.insert(f) {
                        return err(format!("duplicate field `{f}`"));
                    }
                    self.check_type_in(env, tvars, t)?;
                }
                Ok(())
            }
            Base::App(c, ts) => {
                let Some(d) = self.def(c) else {
                    return err(format!("unknown type constructor `{c}`"));
                };
                if d.params.len() != ts.len() {
                    return err(format!("`{c}` expects {} type argument(s), found {}", d.params.len(), ts.len()));
                }
                ts.iter().try_for_each(|t| self.check_type_in(env, tvars, t))
            }
            Base::Product(a, c) => {
                self.check_base(env, tvars, a)?;
                self.check_base(env, tvars, c)
            }
            Base::OrNull(a) => self.check_base(env, tvars, a),
            _ => Ok(()),
        }
    }

    fn check_type_in(&self, env: &SortEnv, tvars: Option<&[String]>, t: &RType) -> Result<(), WfError> {
        self.check_base(env, tvars, &t.base)?;
        let mut e = env.clone();
        e.insert(Var::nu(), Sort::of_base(&t.base));
        self.check_pred(&e, &t.pred)
    }

    /// `Γ;Σ ⊢ t`.
    pub fn wf_type(&self, gamma: &TypeEnv, sigma: &Heap, t: &RType) -> Result<(), WfError> {
        self.check_type_in(&sort_env(gamma, sigma), None, t)
    }

    /// `Γ ⊢ Σ`: distinct locations and binders, every stored type checked
    /// with all of the heap's binders in scope.
    pub fn wf_heap(&self, gamma: &TypeEnv, sigma: &Heap) -> Result<(), WfError> {
        Heap::from_binds(sigma.0.clone()).map_err(|e| WfError(e.to_string()))?;
        let env = sort_env(gamma, sigma);
        for b in &sigma.0 {
            self.check_type_in(&env, None, &b.ty).map_err(|e| WfError(format!("at {}: {}", b.loc, e.0)))?;
        }
        Ok(())
    }

    pub fn wf_typedef(&self, d: &TypeDef) -> Result<(), WfError> {
        Heap::from_binds(d.heap.0.clone()).map_err(|e| WfError(format!("type {}: {e}", d.name)))?;
        let locs: BTreeSet<&Loc> = d.locs.iter().collect();
        if locs.len() != d.locs.len() {
            return err(format!("type {}: existential location listed twice", d.name));
        }
        for b in &d.heap.0 {
            if !locs.contains(&b.loc) {
                return err(format!("type {}: heap location {} is not existentially bound", d.name, b.loc));
            }
            let mut fv = BTreeSet::new();
            b.ty.each_pred(&mut |p| p.vars_into(&mut fv));
            if fv.contains(&d.root) {
                return err(format!("type {}: root binder `{}` escapes into the existential heap", d.name, d.root));
            }
        }
        if !matches!(d.root_ty.base, Base::Record(_)) {
            return err(format!("type {}: root must be a record", d.name));
        }
        for l in d.root_ty.locs() {
            if !locs.contains(&l) {
                return err(format!("type {}: root mentions unbound location {l}", d.name));
            }
        }
        let mut env: SortEnv = d.heap.0.iter().map(|b| (b.binder.clone(), Sort::of_base(&b.ty.base))).collect();
        for b in &d.heap.0 {
            self.check_type_in(&env, Some(&d.params), &b.ty).map_err(|e| WfError(format!("type {}: {}", d.name, e.0)))?;
        }
        env.insert(d.root.clone(), Sort::of_base(&d.root_ty.base));
        self.check_type_in(&env, Some(&d.params), &d.root_ty).map_err(|e| WfError(format!("type {}: {}", d.name, e.0)))
    }

    /// The body must read only fields of the constructor's root record,
    /// recurse only on field projections of the parameter, and make sense
    /// on `null`.
    pub fn wf_measure(&self, d: &TypeDef, m: &Measure) -> Result<(), WfError> {
        if m.ctor != d.name {
            return err(format!("measure {} is over {}, not {}", m.name, m.ctor, d.name));
        }
        let x = &m.param;
        let mut fields = BTreeSet::new();
        d.root_ty.base.each_field(&mut |f| {
            fields.insert(f.to_string());
        });
        if mentions_var(&m.null_case, x) {
            return err(format!("measure {}: null case mentions `{x}`", m.name));
        }
        structural(&m.rec_case, x, &fields, false).map_err(|e| WfError(format!("measure {}: {}", m.name, e.0)))?;
        let mut env = SortEnv::new();
        env.insert(x.clone(), Sort::Snap(d.name.clone()));
        let want = match m.sort {
            MeasSort::Int => Class::Num,
            MeasSort::Bool => Class::Bool,
        };
        for (case, t) in [("null", &m.null_case), ("record", &m.rec_case)] {
            let s = self.sort_of(&env, t).map_err(|e| WfError(format!("measure {} ({case} case): {}", m.name, e.0)))?;
            if class(&s) != want {
                return err(format!("measure {} ({case} case) has sort {s}", m.name));
            }
        }
        Ok(())
    }

    /// Argument and output binders fresh for the ambient context, every
    /// component well formed in order.
    pub fn wf_schema(&self, gamma: &TypeEnv, sigma: &Heap, s: &Schema) -> Result<(), WfError> {
        let mut taken: BTreeSet<Var> = gamma.bound().into_iter().collect();
        taken.extend(sigma.binders());
        let mut fresh = |v: &Var| -> Result<(), WfError> {
            if !taken.insert(v.clone()) {
                return err(format!("binder `{v}` shadows a name already in scope"));
            }
            Ok(())
        };
        for (x, _) in &s.params {
            fresh(x)?;
        }
        for b in &s.heap_in.0 {
            fresh(&b.binder)?;
        }
        if let Some((r, _)) = &s.out {
            fresh(r)?;
        }
        for b in &s.heap_out.0 {
            fresh(&b.binder)?;
        }
        let mut env = sort_env(gamma, sigma);
        let tv = Some(&s.tvars[..]);
        for (x, t) in &s.params {
            env.insert(x.clone(), Sort::of_base(&t.base));
        }
        for b in &s.heap_in.0 {
            env.insert(b.binder.clone(), Sort::of_base(&b.ty.base));
        }
        Heap::from_binds(s.heap_in.0.clone()).map_err(|e| WfError(e.to_string()))?;
        Heap::from_binds(s.heap_out.0.clone()).map_err(|e| WfError(e.to_string()))?;
        for (x, t) in &s.params {
            self.check_type_in(&env, tv, t).map_err(|e| WfError(format!("parameter {x}: {}", e.0)))?;
        }
        for b in &s.heap_in.0 {
            self.check_type_in(&env, tv, &b.ty).map_err(|e| WfError(format!("input heap at {}: {}", b.loc, e.0)))?;
        }
        if let Some((r, t)) = &s.out {
            env.insert(r.clone(), Sort::of_base(&t.base));
        }
        for b in &s.heap_out.0 {
            env.insert(b.binder.clone(), Sort::of_base(&b.ty.base));
        }
        if let Some((_, t)) = &s.out {
            self.check_type_in(&env, tv, t).map_err(|e| WfError(format!("output: {}", e.0)))?;
        }
        for b in &s.heap_out.0 {
            self.check_type_in(&env, tv, &b.ty).map_err(|e| WfError(format!("output heap at {}: {}", b.loc, e.0)))?;
        }
        Ok(())
    }
}

fn mentions_var(t: &Term, x: &Var) -> bool {
    let mut vs = BTreeSet::new();
    t.vars_into(&mut vs);
    vs.contains(x)
}

/// Structural descent: `x` occurs only as `Field(x, f)` with `f` a field of
/// the constructor, and measure calls take only such projections (or
/// subterms free of `x`).
fn structural(t: &Term, x: &Var, fields: &BTreeSet<String>, under_meas: bool) -> Result<(), WfError> {
    match t {
        Term::Var(v) if v == x => {
            if under_meas {
                err(format!("recursive call on `{x}` itself is not structural"))
            } else {
                err(format!("`{x}` used other than through a field"))
            }
        }
        Term::Field(b, f) => match &**b {
            Term::Var(v) if v == x => {
                if fields.contains(f) {
                    Ok(())
                } else {
                    err(format!("field `{f}` is not in the constructor"))
                }
            }
            b => structural(b, x, fields, false),
        },
        Term::Meas(_, a) => structural(a, x, fields, true),
        Term::Bin(_, a, b) => {
            structural(a, x, fields, under_meas)?;
            structural(b, x, fields, under_meas)
        }
        Term::Ite(c, a, b) => {
            let mut r = Ok(());
            c.each_term(&mut |t| {
                if r.is_ok() {
                    r = structural(t, x, fields, false);
                }
            });
            r?;
            structural(a, x, fields, under_meas)?;
            structural(b, x, fields, under_meas)
        }
        _ => Ok(()),
    }
}

/// Sorts of every name bound in `Γ` and every heap binder.
pub fn sort_env(gamma: &TypeEnv, sigma: &Heap) -> SortEnv {
    let mut env = SortEnv::new();
    for i in &gamma.0 {
        if let EnvItem::Bind(x, t) = i {
            env.insert(x.clone(), Sort::of_base(&t.base));
        }
    }
    for b in &sigma.0 {
        env.insert(b.binder.clone(), Sort::of_base(&b.ty.base));
    }
    env
}

/// Pure value sort of a base type under a heap.
pub fn snap_ty(t: &Base, sigma: &Heap) -> Sort {
    snap_visit(t, sigma, &mut BTreeSet::new())
}

fn snap_visit(t: &Base, sigma: &Heap, seen: &mut BTreeSet<Loc>) -> Sort {
    match t {
        Base::Ref(l) | Base::MaybeRef(l) => {
            let inner = match sigma.get(l) {
                Some(b) if !seen.contains(l) => {
                    seen.insert(l.clone());
                    let s = snap_visit(&b.ty.base, sigma, seen);
                    seen.remove(l);
                    Some(Sort::Product(Box::new(Sort::Ptr), Box::new(s)))
                }
                _ => None,
            };
            match (t, inner) {
                (Base::Ref(_), Some(s)) => s,
                (Base::Ref(_), None) => Sort::Ptr,
                (_, Some(s)) => Sort::OrNull(Box::new(s)),
                (_, None) => Sort::OrNull(Box::new(Sort::Ptr)),
            }
        }
        Base::Record(fs) => Sort::Rec(fs.iter().map(|(f, t)| (f.clone(), snap_visit(&t.base, sigma, seen))).collect()),
        b => Sort::of_base(b),
    }
}

/// Every definition, measure and signature of a program.
pub fn check_program(p: &Program) -> Result<(), Vec<WfError>> {
    let defs = p.resolved_typedefs();
    let c = Checker::new(&defs, &p.measures);
    let mut errs = Vec::new();
    for d in &defs {
        if let Err(e) = c.wf_typedef(d) {
            errs.push(e);
        }
    }
    for m in &p.measures {
        match defs.iter().find(|d| d.name == m.ctor) {
            Some(d) => {
                if let Err(e) = c.wf_measure(d, m) {
                    errs.push(e);
                }
            }
            None => errs.push(WfError(format!("measure {} is over unknown type {}", m.name, m.ctor))),
        }
    }
    for f in &p.functions {
        if let Err(e) = c.wf_schema(&TypeEnv::new(), &Heap::emp(), &f.schema) {
            errs.push(WfError(format!("signature of {}: {}", f.name, e.0)));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::{parse_pred, parse_program};

    const LIST: &str = "type list[A] = exists! l => t:list[A] . h:{data:A, next:?ref(l)}\n\
                        measure len : list => int { len(null) = 0; len(x) = 1 + len(x.next); }\n";

    fn prog(extra: &str) -> Program {
        parse_program(&format!("{LIST}{extra}")).unwrap()
    }

    fn int_ty(p: &str) -> RType {
        RType::new(Base::Int, parse_pred(p).unwrap())
    }

    #[test]
    fn refinement_scope() {
        let p = prog("");
        let defs = p.resolved_typedefs();
        let c = Checker::new(&defs, &p.measures);
        assert!(c.wf_type(&TypeEnv::new(), &Heap::emp(), &int_ty("0 <= v")).is_ok());
        let e = c.wf_type(&TypeEnv::new(), &Heap::emp(), &int_ty("v = y")).unwrap_err();
        assert!(e.0.contains("`y`"), "{e}");
        let mut g = TypeEnv::new();
        g.bind(Var::new("x"), RType::plain(Base::Ref(Loc::new("Lx")))).unwrap();
        let h = Heap(vec![HeapBind {
            loc: Loc::new("Lx"),
            binder: Var::new("x0"),
            ty: RType::plain(Base::App("list".into(), vec![RType::int()])),
        }]);
        assert!(c.wf_type(&g, &h, &int_ty("v = len(x0)")).is_ok());
        assert!(c.wf_heap(&g, &h).is_ok());
    }

    #[test]
    fn heap_duplicates() {
        let p = prog("");
        let defs = p.resolved_typedefs();
        let c = Checker::new(&defs, &p.measures);
        let b = |x: &str| HeapBind { loc: Loc::new("L"), binder: Var::new(x), ty: RType::int() };
        assert!(c.wf_heap(&TypeEnv::new(), &Heap::emp()).is_ok());
        assert!(c.wf_heap(&TypeEnv::new(), &Heap(vec![b("x"), b("y")])).unwrap_err().0.contains("location L"));
    }

    #[test]
    fn typedef_checks() {
        assert!(check_program(&prog("")).is_ok());
        let bad = parse_program("type t[A] = exists! l => u:t[B] . h:{data:A, next:?ref(l)}").unwrap();
        assert!(check_program(&bad).unwrap_err()[0].0.contains("`B`"));
        let esc = parse_program("type t = exists! l => u:{v:t | v = h} . h:{next:?ref(l)}").unwrap();
        assert!(check_program(&esc).unwrap_err()[0].0.contains("escapes"));
    }

    #[test]
    fn measure_checks() {
        let p = parse_program(
            "type list[A] = exists! l => t:list[A] . h:{data:A, next:?ref(l)}\n\
             measure bad : list => int { bad(null) = 0; bad(x) = len(x.elts); }\n\
             measure loop : list => int { loop(null) = 0; loop(x) = 1 + loop(x); }\n\
             measure len : list => int { len(null) = 0; len(x) = 1 + len(x.next); }",
        )
        .unwrap();
        let errs = check_program(&p).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs[0].0.contains("elts"));
        assert!(errs[1].0.contains("not structural"));
    }

    #[test]
    fn snapshot_sorts() {
        let h = Heap(vec![HeapBind {
            loc: Loc::new("L"),
            binder: Var::new("t"),
            ty: RType::plain(Base::App("list".into(), vec![RType::plain(Base::TyVar("A".into()))])),
        }]);
        assert_eq!(snap_ty(&Base::Int, &h), Sort::Int);
        assert_eq!(
            snap_ty(&Base::Ref(Loc::new("L")), &h),
            Sort::Product(Box::new(Sort::Ptr), Box::new(Sort::Snap("list".into())))
        );
        assert_eq!(snap_ty(&Base::MaybeRef(Loc::new("M")), &h), Sort::OrNull(Box::new(Sort::Ptr)));
        let cyc = Heap(vec![HeapBind {
            loc: Loc::new("L"),
            binder: Var::new("c"),
            ty: RType::plain(Base::Record(vec![("next".into(), RType::plain(Base::Ref(Loc::new("L"))))])),
        }]);
        let s = snap_ty(&Base::Ref(Loc::new("L")), &cyc);
        assert_eq!(
            s,
            Sort::Product(Box::new(Sort::Ptr), Box::new(Sort::Rec(vec![("next".into(), Sort::Ptr)])))
        );
    }

    #[test]
    fn schema_freshness() {
        let p = prog(
            "forall A. (k:A, x:?ref(x)) / x |-> list[A] => ref(l) / l |-> list[A]\n\
             function insert(k, x){ return x; }",
        );
        assert!(check_program(&p).is_ok());
        let defs = p.resolved_typedefs();
        let c = Checker::new(&defs, &p.measures);
        let mut g = TypeEnv::new();
        g.bind(Var::new("r"), RType::int()).unwrap();
        assert!(c.wf_schema(&g, &Heap::emp(), &p.functions[0].schema).unwrap_err().0.contains("shadows"));
    }
}
