//! Statement rules.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::*;

use super::sub::{join_base, unify_base};
use super::template::name_fields;
use super::{tidy, CgenError, Engine, World};

/// Value of a pure expression: a term, or a predicate for booleans.
#[derive(Clone, Debug)]
pub(crate) enum Val {
    T(Term),
    P(Pred),
}

fn rel_of(op: BinOp) -> Rel {
    match op {
        BinOp::Eq => Rel::Eq,
        BinOp::Ne => Rel::Ne,
        BinOp::Le => Rel::Le,
        BinOp::Lt => Rel::Lt,
        BinOp::Ge => Rel::Ge,
        BinOp::Gt => Rel::Gt,
        _ => unreachable!("not a comparison"),
    }
}

fn self_type(b: &Base, v: &Val) -> RType {
    match v {
        Val::T(t) => RType::new(b.clone(), Pred::eq(Term::nu(), t.clone())),
        Val::P(p) => RType::new(Base::Bool, Pred::iff(Pred::BVar(Term::nu()), p.clone())),
    }
}

/// Replace pointers to locations in `nulls` by the null type.
fn null_out(t: &RType, nulls: &BTreeSet<Loc>) -> RType {
    let base = match &t.base {
        Base::Ref(l) | Base::MaybeRef(l) if nulls.contains(l) => Base::Null,
        Base::Record(fs) => Base::Record(fs.iter().map(|(f, ft)| (f.clone(), null_out(ft, nulls))).collect()),
        b => b.clone(),
    };
    RType { base, pred: t.pred.clone() }
}

fn is_numeric(b: &Base) -> bool {
    matches!(b, Base::Int | Base::TyVar(_))
}

/// Where the formal locations and type variables of a schema land.
pub(crate) struct Matching {
    pub locs: BTreeMap<Loc, Loc>,
    pub tvs: BTreeMap<String, Base>,
    pub unmatched: Vec<Loc>,
}

impl Engine<'_> {
    pub(crate) fn expr_val(&self, w: &World, e: &Expr) -> Result<(Base, Val), CgenError> {
        Ok(match e {
            Expr::Int(n) => (Base::Int, Val::T(Term::Int(*n))),
            Expr::Bool(b) => (Base::Bool, Val::P(if *b { Pred::True } else { Pred::False })),
            Expr::Null => (Base::Null, Val::T(Term::Null)),
            Expr::Loc(l) => (Base::Ref(l.clone()), Val::T(Term::Loc(l.clone()))),
            Expr::Var(x) => {
                let t = w.env.lookup(x).ok_or_else(|| self.err(format!("unbound variable `{x}`")))?;
                if matches!(t.base, Base::Bool) {
                    (Base::Bool, Val::P(Pred::BVar(Term::Var(x.clone()))))
                } else {
                    (t.base.clone(), Val::T(Term::Var(x.clone())))
                }
            }
            Expr::Not(a) => match self.expr_val(w, a)? {
                (_, Val::P(p)) => (Base::Bool, Val::P(Pred::not(p))),
                _ => return Err(self.err("`!` applied to a non-boolean")),
            },
            Expr::Bin(op, a, b) => {
                let (ba, va) = self.expr_val(w, a)?;
                let (bb, vb) = self.expr_val(w, b)?;
                match (op, va, vb) {
                    (BinOp::Add | BinOp::Sub | BinOp::Mul, Val::T(x), Val::T(y))
                        if ba == Base::Int && bb == Base::Int =>
                    {
                        let o = match op {
                            BinOp::Add => AOp::Add,
                            BinOp::Sub => AOp::Sub,
                            _ => AOp::Mul,
                        };
                        (Base::Int, Val::T(Term::Bin(o, Box::new(x), Box::new(y))))
                    }
                    (BinOp::And, Val::P(x), Val::P(y)) => (Base::Bool, Val::P(Pred::and([x, y]))),
                    (BinOp::Or, Val::P(x), Val::P(y)) => (Base::Bool, Val::P(Pred::or([x, y]))),
                    (BinOp::Eq, Val::P(x), Val::P(y)) => (Base::Bool, Val::P(Pred::iff(x, y))),
                    (BinOp::Ne, Val::P(x), Val::P(y)) => (Base::Bool, Val::P(Pred::not(Pred::iff(x, y)))),
                    (BinOp::Eq | BinOp::Ne, Val::T(x), Val::T(y))
                        if (is_numeric(&ba) && is_numeric(&bb)) || (ba.is_pointer() && bb.is_pointer()) =>
                    {
                        (Base::Bool, Val::P(Pred::rel(rel_of(*op), x, y)))
                    }
                    (BinOp::Le | BinOp::Lt | BinOp::Ge | BinOp::Gt, Val::T(x), Val::T(y))
                        if is_numeric(&ba) && is_numeric(&bb) =>
                    {
                        (Base::Bool, Val::P(Pred::rel(rel_of(*op), x, y)))
                    }
                    _ => return Err(self.err(format!("operator `{}` applied to mismatched operands", op.symbol()))),
                }
            }
            Expr::Proj(..) => return Err(self.err("field projections are only allowed in refinements")),
        })
    }

    pub(crate) fn cond_pred(&self, w: &World, e: &Expr) -> Result<Pred, CgenError> {
        match self.expr_val(w, e)? {
            (_, Val::P(p)) => Ok(p),
            _ => Err(self.err("condition is not boolean")),
        }
    }

    /// Selfified type and naming term of an operand. Boolean expressions
    /// other than a variable are named by a fresh temporary.
    pub(crate) fn operand(&mut self, w: &mut World, e: &Expr) -> Result<(RType, Term), CgenError> {
        let (b, v) = self.expr_val(w, e)?;
        match v {
            Val::T(t) => Ok((self_type(&b, &Val::T(t.clone())), t)),
            Val::P(Pred::BVar(Term::Var(x))) => {
                let t = Term::Var(x);
                Ok((self_type(&Base::Bool, &Val::P(Pred::BVar(t.clone()))), t))
            }
            Val::P(p) => {
                let tmp = w.names.fresh_var("_b");
                let ty = self_type(&Base::Bool, &Val::P(p));
                w.env.bind(tmp.clone(), ty).map_err(|x| self.err(format!("`{x}` is assigned twice")))?;
                let t = Term::Var(tmp);
                Ok((self_type(&Base::Bool, &Val::P(Pred::BVar(t.clone()))), t))
            }
        }
    }

    fn bind(&self, w: &mut World, x: &Var, t: RType) -> Result<(), CgenError> {
        w.env.bind(x.clone(), t).map_err(|x| self.err(format!("`{x}` is assigned twice")))
    }

    pub(crate) fn pointer_of(&self, w: &World, x: &Var) -> Result<(RType, Loc), CgenError> {
        let t = w.env.lookup(x).ok_or_else(|| self.err(format!("unbound variable `{x}`")))?;
        match t.base.loc() {
            Some(l) => Ok((t.clone(), l.clone())),
            None => Err(self.err(format!("`{x}` is not a reference"))),
        }
    }

    fn check_nonnull(&mut self, w: &World, x: &Var, t: &RType, rule: &str) {
        if matches!(t.base, Base::MaybeRef(_)) {
            self.emit(
                w,
                &[],
                Pred::eq(Term::nu(), Term::Var(x.clone())),
                Pred::ne(Term::nu(), Term::Null),
                Sort::Ptr,
                rule,
            );
        }
    }

    fn record_at(&self, w: &World, l: &Loc) -> Result<HeapBind, CgenError> {
        if w.is_pad(l) {
            return Err(self.err(format!("location {l} is padded and may be null")));
        }
        let b = w.heap.get(l).ok_or_else(|| self.err(format!("location {l} is not in the heap")))?;
        match &b.ty.base {
            Base::Record(_) => Ok(b.clone()),
            Base::App(c, _) => Err(self.err(format!("location {l} holds a folded {c}; it must be unfolded first"))),
            _ => Err(self.err(format!("location {l} does not hold a record"))),
        }
    }

    /// One non-branching statement. `next` is the next non-annotation
    /// statement of the block, used to pick the type arguments of a fold.
    pub fn step(&mut self, w: &mut World, k: &StmtKind, next: Option<&StmtKind>) -> Result<StmtKind, CgenError> {
        Ok(match k {
            StmtKind::Assign { x, e } => {
                let (b, v) = self.expr_val(w, e)?;
                self.bind(w, x, self_type(&b, &v))?;
                k.clone()
            }
            StmtKind::Read { y, x, f } => {
                let (t, l) = self.pointer_of(w, x)?;
                self.check_nonnull(w, x, &t, "read");
                let b = self.record_at(w, &l)?;
                let ft = b.ty.base.field(f).ok_or_else(|| self.err(format!("no field `{f}` at location {l}")))?;
                let link = Pred::eq(Term::nu(), Term::field(Term::Var(b.binder.clone()), f));
                let pred = if ft.pred.conjuncts().contains(&link) { ft.pred.clone() } else { Pred::and([ft.pred.clone(), link]) };
                self.bind(w, y, RType::new(ft.base.clone(), pred))?;
                k.clone()
            }
            StmtKind::Write { x, f, e, .. } => {
                let (t, l) = self.pointer_of(w, x)?;
                self.check_nonnull(w, x, &t, "write");
                let b = self.record_at(w, &l)?;
                if b.ty.base.field(f).is_none() {
                    return Err(self.err(format!("no field `{f}` at location {l}")));
                }
                let (te, _) = self.operand(w, e)?;
                let z = w.names.fresh_binder(&l);
                let Base::Record(fs) = &b.ty.base else { unreachable!() };
                let fs = fs
                    .iter()
                    .map(|(g, gt)| {
                        if g == f {
                            (g.clone(), te.clone())
                        } else {
                            let link = Pred::eq(Term::nu(), Term::field(Term::Var(z.clone()), g));
                            (g.clone(), RType::new(gt.base.clone(), Pred::and([gt.pred.clone(), link])))
                        }
                    })
                    .collect();
                w.retire(b.clone());
                w.heap.set(HeapBind { loc: l, binder: z.clone(), ty: RType::plain(Base::Record(fs)) });
                StmtKind::Write { x: x.clone(), f: f.clone(), e: e.clone(), ghost: Some(z) }
            }
            StmtKind::Alloc { x, fields, .. } => {
                let l = w.names.fresh_loc(x.as_str());
                let z = w.names.fresh_binder(&l);
                let mut fs = Vec::new();
                for (f, e) in fields {
                    let (t, _) = self.operand(w, e)?;
                    fs.push((f.clone(), t));
                }
                let ty = name_fields(&Term::Var(z.clone()), &RType::plain(Base::Record(fs))).expect("record");
                self.bind(w, x, RType::plain(Base::Ref(l.clone())))?;
                w.heap.set(HeapBind { loc: l.clone(), binder: z.clone(), ty });
                StmtKind::Alloc { x: x.clone(), fields: fields.clone(), ghost: Some((l, z)) }
            }
            StmtKind::Call { x, f, args } => {
                self.call(w, x.as_ref(), f, args)?;
                k.clone()
            }
            StmtKind::Return(e) => {
                self.ret(w, e.as_ref())?;
                k.clone()
            }
            StmtKind::Unfold { loc, .. } => {
                let g = self.unfold(w, loc)?;
                StmtKind::Unfold { loc: loc.clone(), ghost: Some(g) }
            }
            StmtKind::Fold { loc, .. } => {
                let hint = self.fold_hint(w, loc, next);
                let y = self.fold(w, loc, hint)?;
                StmtKind::Fold { loc: loc.clone(), ghost: Some(y) }
            }
            StmtKind::Conc { x, .. } => {
                let (t, l) = self.pointer_of(w, x)?;
                self.check_nonnull(w, x, &t, "conc");
                if w.is_pad(&l) {
                    return Err(self.err(format!("location {l} is padded and may be null")));
                }
                let b = w.heap.get(&l).cloned().ok_or_else(|| self.err(format!("location {l} is not in the heap")))?;
                if w.env.lookup(&b.binder).is_none() {
                    self.bind(w, &b.binder, b.ty.clone())?;
                }
                let z = w.names.fresh_binder(&l);
                let ty = RType::new(b.ty.base.clone(), Pred::eq(Term::nu(), Term::Var(b.binder.clone())));
                w.heap.set(HeapBind { loc: l, binder: z.clone(), ty });
                StmtKind::Conc { x: x.clone(), ghost: Some(z) }
            }
            StmtKind::Pad { loc, .. } => {
                if w.heap.contains(loc) {
                    return Err(self.err(format!("cannot pad location {loc}: it is already in the heap")));
                }
                w.names.reserve_loc(loc);
                let p = w.names.fresh_binder(loc);
                w.heap.set(HeapBind { loc: loc.clone(), binder: p.clone(), ty: RType::plain(Base::Null) });
                w.pads.insert(loc.clone());
                w.env.guard(Pred::eq(Term::Loc(loc.clone()), Term::Null));
                StmtKind::Pad { loc: loc.clone(), ghost: Some(p) }
            }
            StmtKind::If { .. } => return Err(self.err("internal: branching statement passed to step")),
        })
    }

    /// Replace the application at `l` by the constructor's body with fresh
    /// names, and assume the measure instantiations.
    pub(crate) fn unfold(&mut self, w: &mut World, l: &Loc) -> Result<Vec<(Loc, Var)>, CgenError> {
        if w.is_pad(l) {
            return Err(self.err(format!("cannot unfold location {l}: it is padded and may be null")));
        }
        let b = w.heap.get(l).cloned().ok_or_else(|| self.err(format!("location {l} is not in the heap")))?;
        let Base::App(c, args) = &b.ty.base else {
            return Err(self.err(format!("location {l} does not hold a folded structure")));
        };
        self.emit(w, &[], Pred::True, Pred::ne(Term::Loc(l.clone()), Term::Null), Sort::Ptr, "unfold");
        let d = self.def(c)?;
        if d.params.len() != args.len() {
            return Err(self.err(format!("`{c}` expects {} type arguments", d.params.len())));
        }
        let tmap: BTreeMap<String, RType> = d.params.iter().cloned().zip(args.iter().cloned()).collect();
        let mut th = Subst::new();
        for lc in &d.locs {
            let hint = d.heap.get(lc).map(|e| e.binder.0.clone()).unwrap_or_else(|| lc.0.clone());
            th.locs.insert(lc.clone(), w.names.fresh_loc(&hint));
        }
        for e in &d.heap.0 {
            let nb = w.names.fresh_binder(&th.loc(&e.loc));
            th.vars.insert(e.binder.clone(), Term::Var(nb));
        }
        let zr = w.names.fresh_binder(l);
        th.vars.insert(d.root.clone(), Term::Var(zr.clone()));
        let root =
            name_fields(&Term::Var(zr.clone()), &d.root_ty.subst_tyvars(&tmap).subst(&th)).expect("root is a record");
        let entries = d.heap.subst_tyvars(&tmap).subst(&th);
        if w.env.lookup(&b.binder).is_none() {
            self.bind(w, &b.binder, b.ty.clone())?;
        }
        let subj = Term::Var(w.resolve(&b.binder));
        let tails: BTreeMap<Loc, Var> = entries.0.iter().map(|e| (e.loc.clone(), e.binder.clone())).collect();
        let facts = self.measure_facts(d, &subj, &|f| match root.base.field(f).map(|t| &t.base) {
            Some(Base::Ref(m) | Base::MaybeRef(m)) if tails.contains_key(m) => Term::Var(tails[m].clone()),
            Some(Base::Null) => Term::Null,
            _ => Term::field(Term::Var(zr.clone()), f),
        });
        w.env.guard(tidy(&facts));
        w.heap.set(HeapBind { loc: l.clone(), binder: zr.clone(), ty: root });
        let mut ghost = vec![(l.clone(), zr)];
        for e in entries.0 {
            ghost.push((e.loc.clone(), e.binder.clone()));
            w.heap.set(e);
        }
        w.unfolded.insert(l.clone(), c.clone());
        Ok(ghost)
    }

    /// Constructor and type arguments the next statement expects at `l`.
    pub(crate) fn fold_hint(&self, w: &World, l: &Loc, next: Option<&StmtKind>) -> Option<(String, Vec<RType>)> {
        let (heap, locs) = match next? {
            StmtKind::Return(e) => {
                let m = self.match_return(w, e.as_ref()).ok()?;
                (self.schema.heap_out.clone(), m.locs)
            }
            StmtKind::Call { f, args, .. } => {
                let s = self.ctx.schemas.get(f)?;
                let bases: Vec<Base> =
                    args.iter().map(|e| self.expr_val(w, e).map(|(b, _)| b)).collect::<Result<_, _>>().ok()?;
                let m = self.match_call(w, s, &bases);
                (s.heap_in.clone(), m.locs)
            }
            _ => return None,
        };
        let b = heap.0.iter().find(|b| locs.get(&b.loc).unwrap_or(&b.loc) == l)?;
        match &b.ty.base {
            Base::App(c, args) => {
                let mut tv = BTreeSet::new();
                b.ty.tyvars_into(&mut tv);
                let own: BTreeSet<String> = self.schema.tvars.iter().cloned().collect();
                let foreign = matches!(next, Some(StmtKind::Call { .. })) && !tv.is_empty();
                if foreign || !tv.is_subset(&own) {
                    None
                } else {
                    Some((c.clone(), args.clone()))
                }
            }
            _ => None,
        }
    }

    /// Summarize the record at `l` (and the cells its fields point to) as
    /// one instance of a constructor.
    pub(crate) fn fold(
        &mut self,
        w: &mut World,
        l: &Loc,
        hint: Option<(String, Vec<RType>)>,
    ) -> Result<Var, CgenError> {
        if w.is_pad(l) {
            return Err(self.err(format!("cannot fold location {l}: it is padded")));
        }
        let b = w.heap.get(l).cloned().ok_or_else(|| self.err(format!("location {l} is not in the heap")))?;
        let Base::Record(afs) = &b.ty.base else {
            return Err(match &b.ty.base {
                Base::App(..) => self.err(format!("location {l} is already folded")),
                _ => self.err(format!("location {l} does not hold a record")),
            });
        };
        let names: BTreeSet<&String> = afs.iter().map(|(f, _)| f).collect();
        let c = match (w.unfolded.get(l), &hint) {
            (Some(c), _) => c.clone(),
            (None, Some((c, _))) => c.clone(),
            (None, None) => {
                let cands: Vec<&TypeDef> = self
                    .ctx
                    .defs
                    .iter()
                    .filter(|d| match &d.root_ty.base {
                        Base::Record(fs) => fs.iter().map(|(f, _)| f).collect::<BTreeSet<_>>() == names,
                        _ => false,
                    })
                    .collect();
                match cands.as_slice() {
                    [d] => d.name.clone(),
                    _ => return Err(self.err(format!("cannot tell which type to fold location {l} into"))),
                }
            }
        };
        let d = self.def(&c)?;
        let hint_args = hint.filter(|(hc, a)| *hc == c && a.len() == d.params.len()).map(|(_, a)| a);
        let Base::Record(dfs) = &d.root_ty.base else {
            return Err(self.err(format!("`{c}` does not have a record root")));
        };
        let exist: BTreeSet<Loc> = d.locs.iter().cloned().collect();

        // fold nested cells first where the definition expects a structure
        for (f, dt) in dfs {
            let Some(lc) = dt.base.loc().filter(|lc| exist.contains(*lc)) else { continue };
            let Some(ce) = d.heap.get(lc) else { continue };
            if !matches!(ce.ty.base, Base::App(..)) {
                continue;
            }
            let Some(m) = afs.iter().find(|(g, _)| g == f).and_then(|(_, t)| t.base.loc().cloned()) else { continue };
            if w.cell(&m).is_some_and(|e| matches!(e.ty.base, Base::Record(_))) {
                let inner = hint_args.as_ref().and_then(|args| {
                    let tmap: BTreeMap<String, RType> = d.params.iter().cloned().zip(args.iter().cloned()).collect();
                    match ce.ty.subst_tyvars(&tmap).base {
                        Base::App(c2, a2) => Some((c2, a2)),
                        _ => None,
                    }
                });
                self.fold(w, &m, inner)?;
            }
        }

        let args = match hint_args {
            Some(a) => a,
            None => {
                let mut locs = BTreeMap::new();
                let mut tvs = BTreeMap::new();
                unify_base(&d.root_ty.base, &b.ty.base, &exist, &mut locs, &mut tvs);
                for (lc, m) in &locs {
                    if let (Some(ce), Some(cell)) = (d.heap.get(lc), w.cell(m)) {
                        unify_base(&ce.ty.base, &cell.ty.base, &exist, &mut BTreeMap::new(), &mut tvs);
                    }
                }
                let scope = w.scope();
                let mut out = Vec::new();
                for a in &d.params {
                    let bt = tvs
                        .get(a)
                        .cloned()
                        .ok_or_else(|| self.err(format!("cannot infer type argument {a} when folding {l}")))?;
                    out.push(self.template(&bt, &scope, &format!("fold {l} argument {a}")));
                }
                out
            }
        };
        let tmap: BTreeMap<String, RType> = d.params.iter().cloned().zip(args.iter().cloned()).collect();

        let mut th = Subst::new();
        let mut matched: Vec<(Loc, Loc)> = Vec::new();
        for (f, dt) in dfs {
            let Some(lc) = dt.base.loc().filter(|lc| exist.contains(*lc)) else { continue };
            let at = afs
                .iter()
                .find(|(g, _)| g == f)
                .map(|(_, t)| t)
                .ok_or_else(|| self.err(format!("field `{f}` of {c} is missing at location {l}")))?;
            match &at.base {
                Base::Ref(m) | Base::MaybeRef(m) => {
                    if w.is_pad(m) {
                        let like = d.heap.get(lc).map(|e| e.ty.subst_tyvars(&tmap).base).unwrap_or(Base::Int);
                        self.materialize(w, m, &like);
                    }
                    if w.heap.get(m).is_none() {
                        return Err(self.err(format!("location {m} reached from {l}.{f} is not in the heap")));
                    }
                    th.locs.insert(lc.clone(), m.clone());
                    matched.push((lc.clone(), m.clone()));
                }
                Base::Null => {
                    th.null_locs.insert(lc.clone());
                }
                _ => {}
            }
        }
        for lc in &d.locs {
            if !th.locs.contains_key(lc) {
                th.null_locs.insert(lc.clone());
            }
        }
        th.vars.insert(d.root.clone(), Term::Var(b.binder.clone()));
        for (lc, m) in &matched {
            if let Some(ce) = d.heap.get(lc) {
                th.vars.insert(ce.binder.clone(), Term::Var(w.heap.get(m).unwrap().binder.clone()));
            }
        }
        let droot = null_out(&d.root_ty.subst_tyvars(&tmap).subst(&th), &th.null_locs);
        let dheap = d.heap.subst_tyvars(&tmap).subst(&th);
        for (f, _) in afs {
            if droot.base.field(f).is_none() {
                return Err(self.err(format!("field `{f}` at location {l} is not part of {c}")));
            }
        }
        let z = Term::Var(b.binder.clone());
        let folded: BTreeSet<Loc> = matched.iter().map(|(_, m)| m.clone()).collect();
        for (f, at) in afs {
            let dt = droot.base.field(f).unwrap().clone();
            let subj = Term::field(z.clone(), f);
            match at.base.loc() {
                Some(m) if folded.contains(m) && dt.base.loc() == Some(m) => {
                    let cell = w.heap.get(m).unwrap().clone();
                    let stored = dheap.get(m).map(|e| e.ty.clone());
                    let maybe = matches!(at.base, Base::MaybeRef(_));
                    let outer: Vec<Pred> = if maybe && self.opts.fold_null_guard {
                        let nn = Pred::ne(subj.clone(), Term::Null);
                        self.sub(w, std::slice::from_ref(&nn), Some(&subj), at, &dt, "fold")?;
                        self.sub(w, &[Pred::eq(subj.clone(), Term::Null)], Some(&subj), at, &dt, "fold")?;
                        vec![nn]
                    } else {
                        self.sub(w, &[], Some(&subj), at, &dt, "fold")?;
                        vec![]
                    };
                    if let Some(t2) = stored {
                        if matches!(cell.ty.base, Base::Record(_)) && matches!(t2.base, Base::App(..)) {
                            return Err(self.err(format!("location {m} must be folded before {l}")));
                        }
                        let mut extra = outer;
                        if !matches!(cell.ty.base, Base::App(..)) {
                            extra.push(Pred::ne(Term::Loc(m.clone()), Term::Null));
                        }
                        self.sub(w, &extra, Some(&Term::Var(cell.binder.clone())), &cell.ty, &t2, "fold")?;
                    }
                }
                _ => self.sub(w, &[], Some(&subj), at, &dt, "fold")?,
            }
        }

        let y = w.names.fresh_binder(l);
        let tails: BTreeMap<Loc, Var> = matched
            .iter()
            .map(|(lc, m)| (lc.clone(), w.resolve(&w.heap.get(m).unwrap().binder)))
            .collect();
        let nulls = th.null_locs.clone();
        let facts = self.measure_facts(d, &Term::nu(), &|f| {
            let dt = dfs.iter().find(|(g, _)| g == f).map(|(_, t)| &t.base);
            match dt.and_then(|b| b.loc()) {
                Some(lc) if tails.contains_key(lc) => Term::Var(tails[lc].clone()),
                Some(lc) if nulls.contains(lc) => Term::Null,
                _ => match afs.iter().find(|(g, _)| g == f).map(|(_, t)| &t.base) {
                    Some(Base::Null) => Term::Null,
                    _ => Term::field(z.clone(), f),
                },
            }
        });
        for m in &folded {
            if let Some(e) = w.heap.remove(m) {
                w.retire(e);
            }
            w.unfolded.remove(m);
        }
        w.retire(b.clone());
        w.heap.set(HeapBind { loc: l.clone(), binder: y.clone(), ty: RType::new(Base::App(c, args), tidy(&facts)) });
        w.unfolded.remove(l);
        Ok(y)
    }

    pub(crate) fn match_call(&self, w: &World, s: &Schema, bases: &[Base]) -> Matching {
        let q: BTreeSet<Loc> = s.locs.iter().cloned().collect();
        let mut locs = BTreeMap::new();
        let mut tvs = BTreeMap::new();
        for ((_, t), b) in s.params.iter().zip(bases) {
            unify_base(&t.base, b, &q, &mut locs, &mut tvs);
        }
        self.close_matching(w, &s.heap_in, &q, &mut locs, &mut tvs);
        let unmatched = s.locs.iter().filter(|l| !locs.contains_key(*l)).cloned().collect();
        Matching { locs, tvs, unmatched }
    }

    fn close_matching(
        &self,
        w: &World,
        heap: &Heap,
        q: &BTreeSet<Loc>,
        locs: &mut BTreeMap<Loc, Loc>,
        tvs: &mut BTreeMap<String, Base>,
    ) {
        loop {
            let before = (locs.len(), tvs.len());
            for b in &heap.0 {
                if let Some(m) = locs.get(&b.loc).cloned() {
                    if let Some(cell) = w.cell(&m) {
                        unify_base(&b.ty.base, &cell.ty.base, q, locs, tvs);
                    }
                }
            }
            if (locs.len(), tvs.len()) == before {
                break;
            }
        }
    }

    /// Where the output locations of the current function land when
    /// returning `e`. Input locations map to themselves.
    pub(crate) fn match_return(&self, w: &World, e: Option<&Expr>) -> Result<Matching, CgenError> {
        let s = &self.schema;
        let q: BTreeSet<Loc> = s.out_locs.iter().cloned().collect();
        let mut locs = BTreeMap::new();
        let mut tvs = BTreeMap::new();
        if let (Some((_, t)), Some(e)) = (&s.out, e) {
            let (b, _) = self.expr_val(w, e)?;
            unify_base(&t.base, &b, &q, &mut locs, &mut tvs);
        }
        self.close_matching(w, &s.heap_out, &q, &mut locs, &mut tvs);
        let unmatched = s.out_locs.iter().filter(|l| !locs.contains_key(*l)).cloned().collect();
        for b in &s.heap_out.0 {
            if !q.contains(&b.loc) {
                locs.insert(b.loc.clone(), b.loc.clone());
            }
        }
        Ok(Matching { locs, tvs, unmatched })
    }

    /// An unclaimed pad for formal location `l`: the one of the same name,
    /// else the first.
    fn pick_pad(&self, w: &World, l: &Loc, claimed: &BTreeMap<Loc, Loc>, what: &str) -> Result<Loc, CgenError> {
        let taken: BTreeSet<&Loc> = claimed.values().collect();
        let free: Vec<&Loc> = w.pads.iter().filter(|p| !taken.contains(p)).collect();
        if free.contains(&l) {
            return Ok(l.clone());
        }
        free.first()
            .map(|p| (*p).clone())
            .ok_or_else(|| self.err(format!("cannot tell which location instantiates {l} in {what}")))
    }

    pub(crate) fn call(&mut self, w: &mut World, x: Option<&Var>, f: &str, args: &[Expr]) -> Result<(), CgenError> {
        let s = self.ctx.schemas.get(f).cloned().ok_or_else(|| self.err(format!("unknown function `{f}`")))?;
        self.note = format!("call to {f}");
        if s.params.len() != args.len() {
            return Err(self.err(format!("`{f}` expects {} arguments, got {}", s.params.len(), args.len())));
        }
        let mut acts = Vec::new();
        for e in args {
            acts.push(self.operand(w, e)?);
        }
        let bases: Vec<Base> = acts.iter().map(|(t, _)| t.base.clone()).collect();
        let Matching { mut locs, tvs, unmatched } = self.match_call(w, &s, &bases);
        for l in unmatched {
            let p = self.pick_pad(w, &l, &locs, &format!("the call to `{f}`"))?;
            locs.insert(l, p);
        }
        let scope = w.scope();
        let mut tmap = BTreeMap::new();
        for a in &s.tvars {
            let b = tvs.get(a).ok_or_else(|| self.err(format!("cannot infer type variable {a} of `{f}`")))?;
            let t = if matches!(b, Base::Int | Base::Bool) {
                let k = self.fresh_k(&scope, Sort::of_base(b), &format!("{a} in call to {f}"));
                RType::new(b.clone(), k)
            } else {
                RType::plain(b.clone())
            };
            tmap.insert(a.clone(), t);
        }
        for b in &s.heap_in.0 {
            let m = locs[&b.loc].clone();
            self.materialize(w, &m, &b.ty.subst_tyvars(&tmap).base);
        }
        let mut th = Subst::new();
        th.locs = locs.clone();
        for (i, ol) in s.out_locs.iter().enumerate() {
            let hint = match (i, x) {
                (0, Some(x)) => x.0.clone(),
                _ => ol.0.clone(),
            };
            th.locs.insert(ol.clone(), w.names.fresh_loc(&hint));
        }
        for ((p, _), (_, t)) in s.params.iter().zip(&acts) {
            th.vars.insert(p.clone(), t.clone());
        }
        for b in &s.heap_in.0 {
            let m = th.loc(&b.loc);
            let cell = w.heap.get(&m).ok_or_else(|| self.err(format!("location {m} needed by `{f}` is not in the heap")))?;
            th.vars.insert(b.binder.clone(), Term::Var(cell.binder.clone()));
        }
        let outv = match (&s.out, x) {
            (Some((r, _)), Some(x)) => {
                th.vars.insert(r.clone(), Term::Var(x.clone()));
                Some(x.clone())
            }
            (Some((r, _)), None) => {
                let v = w.names.fresh_var("_r");
                th.vars.insert(r.clone(), Term::Var(v.clone()));
                Some(v)
            }
            (None, Some(x)) => return Err(self.err(format!("`{f}` returns nothing but is assigned to `{x}`"))),
            (None, None) => None,
        };
        for b in &s.heap_out.0 {
            let nb = w.names.fresh_binder(&th.loc(&b.loc));
            th.vars.insert(b.binder.clone(), Term::Var(nb));
        }
        for ((_, ft), (at, t)) in s.params.iter().zip(&acts) {
            let ft = ft.subst_tyvars(&tmap).subst(&th);
            self.sub(w, &[], Some(t), at, &ft, "call-arg")?;
        }
        let fin = s.heap_in.subst_tyvars(&tmap).subst(&th);
        self.heap_sub(w, &fin, "call-heap")?;
        for l in fin.dom() {
            if let Some(b) = w.heap.remove(&l) {
                w.retire(b);
            }
            w.unfolded.remove(&l);
        }
        for b in s.heap_out.subst_tyvars(&tmap).subst(&th).0 {
            w.heap.set(b);
        }
        if let (Some((_, t)), Some(v)) = (&s.out, outv) {
            let t = t.subst_tyvars(&tmap).subst(&th);
            let target = match &t.base {
                Base::Ref(l) => w.cell(l).cloned(),
                _ => None,
            };
            self.bind(w, &v, t)?;
            if let Some(c) = target {
                // the result is non-null, so its cell's facts hold outright
                if w.env.lookup(&c.binder).is_none() {
                    self.bind(w, &c.binder, c.ty.clone())?;
                }
                let nb = w.names.fresh_binder(&c.loc);
                let ty = RType::new(c.ty.base.clone(), Pred::eq(Term::nu(), Term::Var(c.binder.clone())));
                w.heap.set(HeapBind { loc: c.loc, binder: nb, ty });
            }
        }
        Ok(())
    }

    pub(crate) fn ret(&mut self, w: &mut World, e: Option<&Expr>) -> Result<(), CgenError> {
        let s = self.schema.clone();
        match (&s.out, e) {
            (Some(_), None) => return Err(self.err("missing return value")),
            (None, Some(_)) => return Err(self.err("a void function cannot return a value")),
            _ => {}
        }
        let Matching { mut locs, .. } = self.match_return(w, e)?;
        for l in &s.out_locs {
            if !locs.contains_key(l) {
                let p = self.pick_pad(w, l, &locs, "the return")?;
                locs.insert(l.clone(), p);
            }
        }
        for b in &s.heap_out.0 {
            let m = locs[&b.loc].clone();
            self.materialize(w, &m, &b.ty.base);
        }
        let mut th = Subst::new();
        th.locs = locs;
        let act = match e {
            Some(e) => Some(self.operand(w, e)?),
            None => None,
        };
        if let (Some((r, _)), Some((_, t))) = (&s.out, &act) {
            th.vars.insert(r.clone(), t.clone());
        }
        for b in &s.heap_out.0 {
            let m = th.loc(&b.loc);
            let cell = w.heap.get(&m).ok_or_else(|| self.err(format!("location {m} is missing at the return")))?;
            th.vars.insert(b.binder.clone(), Term::Var(cell.binder.clone()));
        }
        if let (Some((_, t)), Some((at, term))) = (&s.out, &act) {
            self.sub(w, &[], Some(term), at, &t.subst(&th), "return")?;
        }
        self.heap_sub(w, &s.heap_out.subst(&th), "return-heap")?;
        w.dead = true;
        Ok(())
    }

    /// Merge the worlds at the end of the two branches of an `if` started
    /// in `w0`.
    pub fn join(&mut self, w0: &World, mut w1: World, mut w2: World) -> Result<World, CgenError> {
        match (w1.dead, w2.dead) {
            (true, true) => {
                w1.names.merge_vars(&w2.names);
                return Ok(w1);
            }
            (true, false) => {
                w2.names.merge_vars(&w1.names);
                return Ok(w2);
            }
            (false, true) => {
                w1.names.merge_vars(&w2.names);
                return Ok(w1);
            }
            _ => {}
        }
        for l in w1.pads.clone() {
            if let Some(b) = w2.cell(&l).cloned() {
                self.materialize(&mut w1, &l, &b.ty.base);
            }
        }
        for l in w2.pads.clone() {
            if let Some(b) = w1.cell(&l).cloned() {
                self.materialize(&mut w2, &l, &b.ty.base);
            }
        }
        if w1.heap.dom() != w2.heap.dom() {
            let show = |h: &Heap| h.dom().iter().map(|l| l.0.clone()).collect::<Vec<_>>().join(", ");
            return Err(self.err(format!(
                "the branches end with different heap domains: {{{}}} and {{{}}}",
                show(&w1.heap),
                show(&w2.heap)
            )));
        }
        let mut w = w0.clone();
        w.names = w1.names.clone();
        w.names.merge(&w2.names);
        let scope0 = w0.scope();
        let in_scope: BTreeSet<Var> = scope0.iter().map(|(v, _)| v.clone()).collect();

        let before: BTreeSet<Var> = w0.env.bound().into_iter().collect();
        let mut joined = Vec::new();
        for x in w1.env.bound() {
            if before.contains(&x) {
                continue;
            }
            if let (Some(t1), Some(t2)) = (w1.env.lookup(&x), w2.env.lookup(&x)) {
                let b = join_base(&t1.base, &t2.base)
                    .ok_or_else(|| self.err(format!("`{x}` has incompatible types in the two branches")))?;
                let t = self.template(&b, &scope0, &format!("join of {x}"));
                joined.push((x.clone(), t, t1.clone(), t2.clone()));
            }
        }

        let mut jheap = Heap::emp();
        let mut pads = BTreeSet::new();
        for b1 in &w1.heap.0 {
            let b2 = w2.heap.get(&b1.loc).expect("domains agree");
            if w1.is_pad(&b1.loc) && w2.is_pad(&b1.loc) {
                pads.insert(b1.loc.clone());
                jheap.0.push(b1.clone());
                continue;
            }
            let mut fv = BTreeSet::new();
            b1.ty.each_pred(&mut |p| p.vars_into(&mut fv));
            fv.remove(&Var::nu());
            fv.remove(&b1.binder);
            if b1 == b2 && fv.is_subset(&in_scope) {
                jheap.0.push(b1.clone());
                continue;
            }
            let base = join_base(&b1.ty.base, &b2.ty.base)
                .ok_or_else(|| self.err(format!("the branches disagree on the shape of location {}", b1.loc)))?;
            let z = w.names.fresh_binder(&b1.loc);
            let mut t = self.template(&base, &scope0, &format!("join at {}", b1.loc));
            if let Some(named) = name_fields(&Term::Var(z.clone()), &t) {
                t = named;
            }
            jheap.0.push(HeapBind { loc: b1.loc.clone(), binder: z, ty: t });
        }
        let checked = Heap(jheap.0.iter().filter(|b| !pads.contains(&b.loc)).cloned().collect());
        for wi in [&w1, &w2] {
            for (x, t, t1, t2) in &joined {
                let ti = if std::ptr::eq(wi, &w1) { t1 } else { t2 };
                self.sub(wi, &[], Some(&Term::Var(x.clone())), ti, t, "join")?;
            }
            self.heap_sub(wi, &checked, "join-heap")?;
        }
        w.heap = jheap;
        w.pads = pads;
        w.unfolded = w1
            .unfolded
            .iter()
            .filter(|(l, c)| w2.unfolded.get(*l) == Some(*c))
            .map(|(l, c)| (l.clone(), c.clone()))
            .collect();
        for (x, t, _, _) in joined {
            self.bind(&mut w, &x, t)?;
        }
        w.dead = false;
        Ok(w)
    }
}
