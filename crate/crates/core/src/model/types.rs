use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::names::{Loc, Var};
use super::pred::{Pred, Subst, Term};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Base {
    Int,
    Bool,
    TyVar(String),
    Null,
    Ref(Loc),
    MaybeRef(Loc),
    Record(Vec<(String, RType)>),
    App(String, Vec<RType>),
    /// Pointer-and-contents pair of a snapshot (logic only).
    Product(Box<Base>, Box<Base>),
    /// A snapshot that may be null (logic only).
    OrNull(Box<Base>),
}

/// Refined type `{ν:b | φ}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct RType {
    pub base: Base,
    pub pred: Pred,
}

impl RType {
    pub fn new(base: Base, pred: Pred) -> RType {
        RType { base, pred }
    }

    pub fn plain(base: Base) -> RType {
        RType { base, pred: Pred::True }
    }

    pub fn int() -> RType {
        RType::plain(Base::Int)
    }

    /// Location symbols occurring in ref/?ref positions.
    pub fn locs(&self) -> BTreeSet<Loc> {
        let mut out = BTreeSet::new();
        self.base.locs_into(&mut out);
        out
    }

    /// Substitution under the value-variable binder: ν itself is never
    /// replaced, and a range that mentions ν is rejected by construction
    /// (callers instantiate ν through `Pred::at`).
    pub fn subst(&self, s: &Subst) -> RType {
        let s = if s.vars.contains_key(&Var::nu()) { s.without_var(&Var::nu()) } else { s.clone() };
        RType { base: self.base.subst(&s), pred: self.pred.subst(&s) }
    }

    /// Replace type variables.
    pub fn subst_tyvars(&self, m: &BTreeMap<String, RType>) -> RType {
        match &self.base {
            Base::TyVar(a) => match m.get(a) {
                Some(t) => RType { base: t.base.clone(), pred: Pred::and([t.pred.clone(), self.pred.clone()]) },
                None => self.clone(),
            },
            b => RType { base: b.subst_tyvars(m), pred: self.pred.clone() },
        }
    }

    pub fn erase(&self) -> RType {
        RType { base: self.base.erase(), pred: Pred::True }
    }

    pub fn map_preds(&self, f: &mut dyn FnMut(&Pred) -> Pred) -> RType {
        RType { base: self.base.map_preds(f), pred: f(&self.pred) }
    }

    pub fn each_pred(&self, f: &mut dyn FnMut(&Pred)) {
        f(&self.pred);
        self.base.each_pred(f);
    }

    pub fn tyvars_into(&self, out: &mut BTreeSet<String>) {
        self.base.tyvars_into(out)
    }
}

impl Base {
    pub fn locs_into(&self, out: &mut BTreeSet<Loc>) {
        match self {
            Base::Ref(l) | Base::MaybeRef(l) => {
                out.insert(l.clone());
            }
            Base::Record(fs) => fs.iter().for_each(|(_, t)| t.base.locs_into(out)),
            Base::App(_, ts) => ts.iter().for_each(|t| t.base.locs_into(out)),
            Base::Product(a, b) => {
                a.locs_into(out);
                b.locs_into(out);
            }
            Base::OrNull(a) => a.locs_into(out),
            _ => {}
        }
    }

    pub fn loc(&self) -> Option<&Loc> {
        match self {
            Base::Ref(l) | Base::MaybeRef(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, Base::Ref(_) | Base::MaybeRef(_) | Base::Null)
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Base::Int | Base::Bool | Base::TyVar(_))
    }

    pub fn subst(&self, s: &Subst) -> Base {
        match self {
            Base::Ref(l) => Base::Ref(s.loc(l)),
            Base::MaybeRef(l) => Base::MaybeRef(s.loc(l)),
            Base::Record(fs) => Base::Record(fs.iter().map(|(f, t)| (f.clone(), t.subst(s))).collect()),
            Base::App(c, ts) => Base::App(c.clone(), ts.iter().map(|t| t.subst(s)).collect()),
            Base::Product(a, b) => Base::Product(Box::new(a.subst(s)), Box::new(b.subst(s))),
            Base::OrNull(a) => Base::OrNull(Box::new(a.subst(s))),
            b => b.clone(),
        }
    }

    pub fn subst_tyvars(&self, m: &BTreeMap<String, RType>) -> Base {
        match self {
            Base::TyVar(a) => m.get(a).map(|t| t.base.clone()).unwrap_or_else(|| self.clone()),
            Base::Record(fs) => Base::Record(fs.iter().map(|(f, t)| (f.clone(), t.subst_tyvars(m))).collect()),
            Base::App(c, ts) => Base::App(c.clone(), ts.iter().map(|t| t.subst_tyvars(m)).collect()),
            Base::Product(a, b) => Base::Product(Box::new(a.subst_tyvars(m)), Box::new(b.subst_tyvars(m))),
            Base::OrNull(a) => Base::OrNull(Box::new(a.subst_tyvars(m))),
            b => b.clone(),
        }
    }

    pub fn erase(&self) -> Base {
        self.map_preds(&mut |_| Pred::True)
    }

    pub fn map_preds(&self, f: &mut dyn FnMut(&Pred) -> Pred) -> Base {
        match self {
            Base::Record(fs) => Base::Record(fs.iter().map(|(n, t)| (n.clone(), t.map_preds(f))).collect()),
            Base::App(c, ts) => Base::App(c.clone(), ts.iter().map(|t| t.map_preds(f)).collect()),
            b => b.clone(),
        }
    }

    pub fn each_pred(&self, f: &mut dyn FnMut(&Pred)) {
        match self {
            Base::Record(fs) => fs.iter().for_each(|(_, t)| t.each_pred(f)),
            Base::App(_, ts) => ts.iter().for_each(|t| t.each_pred(f)),
            _ => {}
        }
    }

    pub fn tyvars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Base::TyVar(a) => {
                out.insert(a.clone());
            }
            Base::Record(fs) => fs.iter().for_each(|(_, t)| t.tyvars_into(out)),
            Base::App(_, ts) => ts.iter().for_each(|t| t.tyvars_into(out)),
            Base::Product(a, b) => {
                a.tyvars_into(out);
                b.tyvars_into(out);
            }
            Base::OrNull(a) => a.tyvars_into(out),
            _ => {}
        }
    }

    /// Visit every record field name, recursively.
    pub fn each_field(&self, g: &mut dyn FnMut(&str)) {
        match self {
            Base::Record(fs) => fs.iter().for_each(|(f, t)| {
                g(f);
                t.base.each_field(g)
            }),
            Base::App(_, ts) => ts.iter().for_each(|t| t.base.each_field(g)),
            _ => {}
        }
    }

    pub fn field(&self, f: &str) -> Option<&RType> {
        match self {
            Base::Record(fs) => fs.iter().find(|(n, _)| n == f).map(|(_, t)| t),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct HeapBind {
    pub loc: Loc,
    pub binder: Var,
    pub ty: RType,
}

/// Ordered heap `ℓ1 ↦ x1:T1 * ...`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Heap(pub Vec<HeapBind>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeapError {
    DuplicateLoc(Loc),
    DuplicateBinder(Var),
}

impl fmt::Display for HeapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeapError::DuplicateLoc(l) => write!(f, "location {l} bound twice in heap"),
            HeapError::DuplicateBinder(b) => write!(f, "binder {b} bound twice in heap"),
        }
    }
}

impl Heap {
    pub fn emp() -> Heap {
        Heap(Vec::new())
    }

    /// Checked constructor.
    pub fn from_binds(binds: Vec<HeapBind>) -> Result<Heap, HeapError> {
        let mut locs = BTreeSet::new();
        let mut binders = BTreeSet::new();
        for b in &binds {
            if !locs.insert(b.loc.clone()) {
                return Err(HeapError::DuplicateLoc(b.loc.clone()));
            }
            if !binders.insert(b.binder.clone()) {
                return Err(HeapError::DuplicateBinder(b.binder.clone()));
            }
        }
        Ok(Heap(binds))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, l: &Loc) -> Option<&HeapBind> {
        self.0.iter().find(|b| &b.loc == l)
    }

    pub fn get_mut(&mut self, l: &Loc) -> Option<&mut HeapBind> {
        self.0.iter_mut().find(|b| &b.loc == l)
    }

    pub fn contains(&self, l: &Loc) -> bool {
        self.get(l).is_some()
    }

    pub fn remove(&mut self, l: &Loc) -> Option<HeapBind> {
        let i = self.0.iter().position(|b| &b.loc == l)?;
        Some(self.0.remove(i))
    }

    /// Insert or replace, keeping the position of an existing binding.
    pub fn set(&mut self, b: HeapBind) {
        match self.0.iter().position(|x| x.loc == b.loc) {
            Some(i) => self.0[i] = b,
            None => self.0.push(b),
        }
    }

    pub fn dom(&self) -> BTreeSet<Loc> {
        self.0.iter().map(|b| b.loc.clone()).collect()
    }

    pub fn binders(&self) -> BTreeSet<Var> {
        self.0.iter().map(|b| b.binder.clone()).collect()
    }

    /// Domain plus every location mentioned by a stored type.
    pub fn locs(&self) -> BTreeSet<Loc> {
        let mut out = self.dom();
        for b in &self.0 {
            b.ty.base.locs_into(&mut out);
        }
        out
    }

    pub fn subst(&self, s: &Subst) -> Heap {
        Heap(
            self.0
                .iter()
                .map(|b| HeapBind {
                    loc: s.loc(&b.loc),
                    binder: match s.vars.get(&b.binder) {
                        Some(Term::Var(v)) => v.clone(),
                        _ => b.binder.clone(),
                    },
                    ty: b.ty.subst(s),
                })
                .collect(),
        )
    }

    pub fn subst_tyvars(&self, m: &BTreeMap<String, RType>) -> Heap {
        Heap(
            self.0
                .iter()
                .map(|b| HeapBind { loc: b.loc.clone(), binder: b.binder.clone(), ty: b.ty.subst_tyvars(m) })
                .collect(),
        )
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EnvItem {
    Bind(Var, RType),
    Guard(Pred),
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct TypeEnv(pub Vec<EnvItem>);

impl TypeEnv {
    pub fn new() -> TypeEnv {
        TypeEnv(Vec::new())
    }

    pub fn lookup(&self, x: &Var) -> Option<&RType> {
        self.0.iter().rev().find_map(|i| match i {
            EnvItem::Bind(y, t) if y == x => Some(t),
            _ => None,
        })
    }

    pub fn bound(&self) -> Vec<Var> {
        self.0
            .iter()
            .filter_map(|i| match i {
                EnvItem::Bind(y, _) => Some(y.clone()),
                _ => None,
            })
            .collect()
    }

    /// Pushes a binding; rejects rebinding an identifier.
    pub fn bind(&mut self, x: Var, t: RType) -> Result<(), Var> {
        if self.lookup(&x).is_some() {
            return Err(x);
        }
        self.0.push(EnvItem::Bind(x, t));
        Ok(())
    }

    pub fn guard(&mut self, p: Pred) {
        if !p.is_true() {
            self.0.push(EnvItem::Guard(p));
        }
    }
}

/// Function type `∀L̄,ᾱ. (x̄:t̄)/Σi ⇒ ∃L̄o. x:t/Σo`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Schema {
    pub locs: Vec<Loc>,
    pub tvars: Vec<String>,
    pub params: Vec<(Var, RType)>,
    pub heap_in: Heap,
    pub out_locs: Vec<Loc>,
    /// `None` for `void`.
    pub out: Option<(Var, RType)>,
    pub heap_out: Heap,
}

impl Schema {
    /// Names bound by the schema itself.
    pub fn bound_vars(&self) -> BTreeSet<Var> {
        let mut s: BTreeSet<Var> = self.params.iter().map(|(x, _)| x.clone()).collect();
        s.extend(self.heap_in.binders());
        s.extend(self.heap_out.binders());
        if let Some((x, _)) = &self.out {
            s.insert(x.clone());
        }
        s
    }

    pub fn bound_locs(&self) -> BTreeSet<Loc> {
        self.locs.iter().chain(self.out_locs.iter()).cloned().collect()
    }

    /// Capture-avoiding application: bound names are dropped from the
    /// substitution domain, and any bound name that occurs in the range is
    /// renamed first.
    pub fn subst(&self, s: &Subst) -> Schema {
        let bound_v = self.bound_vars();
        let bound_l = self.bound_locs();
        let mut s = s.clone();
        s.vars.retain(|k, _| !bound_v.contains(k));
        s.locs.retain(|k, _| !bound_l.contains(k));
        s.null_locs.retain(|k| !bound_l.contains(k));
        let range_v = s.range_vars();
        let mut range_l: BTreeSet<Loc> = s.locs.values().cloned().collect();
        for t in s.vars.values() {
            t.locs_into(&mut range_l);
        }
        let mut this = self.clone();
        let mut avoid_v: BTreeSet<Var> = range_v.iter().chain(bound_v.iter()).cloned().collect();
        let mut avoid_l: BTreeSet<Loc> = range_l.iter().chain(bound_l.iter()).cloned().collect();
        let mut ren = Subst::new();
        for v in bound_v.iter().filter(|v| range_v.contains(*v)) {
            let nv = prime_var(v, &avoid_v);
            avoid_v.insert(nv.clone());
            ren.vars.insert(v.clone(), Term::Var(nv));
        }
        for l in bound_l.iter().filter(|l| range_l.contains(*l)) {
            let nl = prime_loc(l, &avoid_l);
            avoid_l.insert(nl.clone());
            ren.locs.insert(l.clone(), nl);
        }
        if !ren.is_empty() {
            this = this.rename(&ren);
        }
        this.apply_raw(&s)
    }

    /// Apply a renaming to binding occurrences as well as uses.
    pub fn rename(&self, r: &Subst) -> Schema {
        let rv = |v: &Var| match r.vars.get(v) {
            Some(Term::Var(n)) => n.clone(),
            _ => v.clone(),
        };
        Schema {
            locs: self.locs.iter().map(|l| r.loc(l)).collect(),
            tvars: self.tvars.clone(),
            params: self.params.iter().map(|(x, t)| (rv(x), t.subst(r))).collect(),
            heap_in: self.heap_in.subst(r),
            out_locs: self.out_locs.iter().map(|l| r.loc(l)).collect(),
            out: self.out.as_ref().map(|(x, t)| (rv(x), t.subst(r))),
            heap_out: self.heap_out.subst(r),
        }
    }

    fn apply_raw(&self, s: &Subst) -> Schema {
        Schema {
            locs: self.locs.clone(),
            tvars: self.tvars.clone(),
            params: self.params.iter().map(|(x, t)| (x.clone(), t.subst(s))).collect(),
            heap_in: self.heap_in.subst(s),
            out_locs: self.out_locs.clone(),
            out: self.out.as_ref().map(|(x, t)| (x.clone(), t.subst(s))),
            heap_out: self.heap_out.subst(s),
        }
    }

    pub fn map_preds(&self, f: &mut dyn FnMut(&Pred) -> Pred) -> Schema {
        let hm = |h: &Heap, f: &mut dyn FnMut(&Pred) -> Pred| {
            Heap(
                h.0.iter()
                    .map(|b| HeapBind { loc: b.loc.clone(), binder: b.binder.clone(), ty: b.ty.map_preds(f) })
                    .collect(),
            )
        };
        Schema {
            locs: self.locs.clone(),
            tvars: self.tvars.clone(),
            params: self.params.iter().map(|(x, t)| (x.clone(), t.map_preds(f))).collect(),
            heap_in: hm(&self.heap_in, f),
            out_locs: self.out_locs.clone(),
            out: self.out.as_ref().map(|(x, t)| (x.clone(), t.map_preds(f))),
            heap_out: hm(&self.heap_out, f),
        }
    }

    pub fn erase(&self) -> Schema {
        self.map_preds(&mut |_| Pred::True)
    }
}

fn prime_var(v: &Var, avoid: &BTreeSet<Var>) -> Var {
    let mut i = 1;
    loop {
        let c = Var::new(format!("{}'{}", v.0, i));
        if !avoid.contains(&c) {
            return c;
        }
        i += 1;
    }
}

fn prime_loc(l: &Loc, avoid: &BTreeSet<Loc>) -> Loc {
    let mut i = 1;
    loop {
        let c = Loc::new(format!("{}'{}", l.0, i));
        if !avoid.contains(&c) {
            return c;
        }
        i += 1;
    }
}

/// Result sort of a measure.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum MeasSort {
    Int,
    Bool,
}

/// Structurally recursive function over snapshots of one constructor.
/// `null_case` is the value on `null`; `rec_case` may use `param.f`
/// (written `Field(param, f)`) and recursive calls on such projections.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Measure {
    pub name: String,
    pub ctor: String,
    pub param: Var,
    pub sort: MeasSort,
    pub null_case: Term,
    pub rec_case: Term,
}

impl Measure {
    /// The single normalized body `ite(x = null, c, e)`.
    pub fn body(&self) -> Term {
        Term::Ite(
            Box::new(Pred::eq(Term::Var(self.param.clone()), Term::Null)),
            Box::new(self.null_case.clone()),
            Box::new(self.rec_case.clone()),
        )
    }
}

/// `type C[ᾱ] = ∃! L̄ ⇒ Σ . x:{...}`
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TypeDef {
    pub name: String,
    pub params: Vec<String>,
    pub locs: Vec<Loc>,
    pub heap: Heap,
    pub root: Var,
    pub root_ty: RType,
    pub measures: Vec<Measure>,
}

impl TypeDef {
    pub fn measure(&self, name: &str) -> Option<&Measure> {
        self.measures.iter().find(|m| m.name == name)
    }
}

/// Sort of a term at checking time. Pointers get their own sort here and
/// are erased to the integer sort in the logic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Sort {
    Int,
    Bool,
    Ptr,
    TyVar(String),
    Snap(String),
    Rec(Vec<(String, Sort)>),
    Product(Box<Sort>, Box<Sort>),
    OrNull(Box<Sort>),
}

impl Sort {
    pub fn is_bool(&self) -> bool {
        matches!(self, Sort::Bool)
    }

    pub fn of_base(b: &Base) -> Sort {
        match b {
            Base::Int => Sort::Int,
            Base::Bool => Sort::Bool,
            Base::TyVar(a) => Sort::TyVar(a.clone()),
            Base::Null | Base::Ref(_) | Base::MaybeRef(_) => Sort::Ptr,
            Base::Record(fs) => Sort::Rec(fs.iter().map(|(f, t)| (f.clone(), Sort::of_base(&t.base))).collect()),
            Base::App(c, _) => Sort::Snap(c.clone()),
            Base::Product(a, b) => Sort::Product(Box::new(Sort::of_base(a)), Box::new(Sort::of_base(b))),
            Base::OrNull(a) => Sort::OrNull(Box::new(Sort::of_base(a))),
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("int"),
            Sort::Bool => f.write_str("bool"),
            Sort::Ptr => f.write_str("ptr"),
            Sort::TyVar(a) => write!(f, "{a}"),
            Sort::Snap(c) => write!(f, "{c}"),
            Sort::Rec(fs) => {
                f.write_str("{")?;
                for (i, (n, s)) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{n}:{s}")?;
                }
                f.write_str("}")
            }
            Sort::Product(a, b) => write!(f, "({a} * {b})"),
            Sort::OrNull(a) => write!(f, "({a} + null)"),
        }
    }
}

/// Sort pattern used by qualifier signatures.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum SortPat {
    Is(Sort),
    Any(String),
}

impl fmt::Display for SortPat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SortPat::Is(s) => write!(f, "{s}"),
            SortPat::Any(a) => write!(f, "{a}"),
        }
    }
}

/// Predicate template. Wildcards occur in `body` as variables `~A`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Qualifier {
    pub name: String,
    pub nu_sort: SortPat,
    pub wildcards: Vec<(String, SortPat)>,
    pub body: Pred,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lt() -> Loc {
        Loc::new("Lt")
    }

    #[test]
    fn locs_of_types() {
        assert!(RType::int().locs().is_empty());
        let r = RType::plain(Base::Record(vec![
            ("data".into(), RType::int()),
            ("next".into(), RType::plain(Base::MaybeRef(lt()))),
        ]));
        assert_eq!(r.locs().into_iter().collect::<Vec<_>>(), vec![lt()]);
    }

    #[test]
    fn heap_rejects_duplicates() {
        let b = |l: &str, x: &str| HeapBind { loc: Loc::new(l), binder: Var::new(x), ty: RType::int() };
        assert_eq!(Heap::from_binds(vec![b("L", "x"), b("L", "y")]), Err(HeapError::DuplicateLoc(Loc::new("L"))));
        assert_eq!(Heap::from_binds(vec![b("L", "x"), b("M", "x")]), Err(HeapError::DuplicateBinder(Var::new("x"))));
        assert!(Heap::from_binds(vec![b("L", "x"), b("M", "y")]).is_ok());
    }

    #[test]
    fn schema_substitution_avoids_capture() {
        let a = Loc::new("a");
        let s = Schema {
            locs: vec![],
            out_locs: vec![a.clone()],
            out: Some((Var::new("r"), RType::plain(Base::Ref(a.clone())))),
            heap_out: Heap(vec![HeapBind { loc: a.clone(), binder: Var::new("y"), ty: RType::int() }]),
            ..Schema::default()
        };
        let mut th = Subst::new();
        th.locs.insert(a.clone(), Loc::new("b"));
        assert_eq!(s.subst(&th), s);
        let mut th2 = Subst::new();
        th2.locs.insert(Loc::new("c"), a.clone());
        let r = s.subst(&th2);
        assert_eq!(r.out_locs, vec![Loc::new("a'1")]);
    }
}
