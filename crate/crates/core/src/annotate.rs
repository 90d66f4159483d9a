//! Heap annotation inference: physical type checking that inserts the
//! `conc`, `unfold`, `fold` and `pad` statements a program needs.

use std::collections::{BTreeMap, BTreeSet};

use crate::cgen::{CgenError, Ctx, Engine, Mode, Options, World};
use crate::model::*;

/// Locations to unfold before accessing a field through `x`: the location
/// `x` points to, when it holds a type application not already in `u`.
/// Returns the unfolds and the grown unfolded set.
pub fn unfold_list(
    x: &Var,
    env: &TypeEnv,
    heap: &Heap,
    u: &BTreeMap<Loc, String>,
) -> Result<(Vec<StmtKind>, BTreeMap<Loc, String>), String> {
    let t = env.lookup(x).ok_or_else(|| format!("unbound variable `{x}`"))?;
    let l = t.base.loc().ok_or_else(|| format!("`{x}` is not a reference"))?;
    let mut u = u.clone();
    let mut out = Vec::new();
    if let Some(Base::App(c, _)) = heap.get(l).map(|b| &b.ty.base) {
        if !u.contains_key(l) {
            u.insert(l.clone(), c.clone());
            out.push(StmtKind::Unfold { loc: l.clone(), ghost: None });
        }
    }
    Ok((out, u))
}

/// Topological order of `locs` in which every location comes after those
/// it depends on. Ties are broken lexicographically. On a cycle, returns
/// the locations left unordered.
pub fn fold_order(locs: &BTreeSet<Loc>, deps: &BTreeMap<Loc, BTreeSet<Loc>>) -> Result<Vec<Loc>, Vec<Loc>> {
    let mut indeg: BTreeMap<&Loc, usize> = locs.iter().map(|l| (l, 0)).collect();
    let mut users: BTreeMap<&Loc, Vec<&Loc>> = BTreeMap::new();
    for l in locs {
        for d in deps.get(l).into_iter().flatten().filter(|d| locs.contains(*d) && *d != l) {
            *indeg.get_mut(l).unwrap() += 1;
            users.entry(d).or_default().push(l);
        }
        if deps.get(l).is_some_and(|ds| ds.contains(l)) {
            return Err(vec![l.clone()]);
        }
    }
    let mut ready: BTreeSet<&Loc> = indeg.iter().filter(|(_, n)| **n == 0).map(|(l, _)| *l).collect();
    let mut out = Vec::new();
    while let Some(l) = ready.pop_first() {
        out.push(l.clone());
        for u in users.get(l).into_iter().flatten() {
            let n = indeg.get_mut(u).unwrap();
            *n -= 1;
            if *n == 0 {
                ready.insert(u);
            }
        }
    }
    if out.len() < locs.len() {
        return Err(locs.iter().filter(|l| !out.contains(l)).cloned().collect());
    }
    Ok(out)
}

/// Folds turning `sigma` into the shape of `target`: every location that
/// `target` holds as a type application but `sigma` holds as a record,
/// plus the records those reach through fields where the constructor
/// expects a folded structure. Dependencies come first.
pub fn fold_list(
    sigma: &Heap,
    target: &Heap,
    u: &BTreeMap<Loc, String>,
    defs: &[TypeDef],
) -> Result<(Vec<StmtKind>, BTreeMap<Loc, String>), Vec<Loc>> {
    let mut todo: Vec<(Loc, String)> = Vec::new();
    for b in &target.0 {
        if let (Base::App(c, _), Some(Base::Record(_))) = (&b.ty.base, sigma.get(&b.loc).map(|e| &e.ty.base)) {
            todo.push((b.loc.clone(), c.clone()));
        }
    }
    let mut set = BTreeSet::new();
    let mut deps: BTreeMap<Loc, BTreeSet<Loc>> = BTreeMap::new();
    while let Some((l, c)) = todo.pop() {
        if !set.insert(l.clone()) {
            continue;
        }
        let (Some(d), Some(Base::Record(afs))) = (defs.iter().find(|d| d.name == c), sigma.get(&l).map(|e| &e.ty.base))
        else {
            continue;
        };
        let Base::Record(dfs) = &d.root_ty.base else { continue };
        for (f, dt) in dfs {
            let Some(lc) = dt.base.loc() else { continue };
            let Some(Base::App(c2, _)) = d.heap.get(lc).map(|e| &e.ty.base) else { continue };
            let Some(m) = afs.iter().find(|(g, _)| g == f).and_then(|(_, t)| t.base.loc()) else { continue };
            if matches!(sigma.get(m).map(|e| &e.ty.base), Some(Base::Record(_))) {
                deps.entry(l.clone()).or_default().insert(m.clone());
                todo.push((m.clone(), c2.clone()));
            }
        }
    }
    let order = fold_order(&set, &deps)?;
    let mut u = u.clone();
    for l in &order {
        u.remove(l);
    }
    Ok((order.into_iter().map(|loc| StmtKind::Fold { loc, ghost: None }).collect(), u))
}

/// Whether `l` holds records in both heaps with some field whose two
/// types mention more than one location between them.
pub fn alias_check(l: &Loc, s1: &Heap, s2: &Heap) -> bool {
    let (Some(Base::Record(f1)), Some(Base::Record(f2))) = (s1.get(l).map(|b| &b.ty.base), s2.get(l).map(|b| &b.ty.base))
    else {
        return false;
    };
    f1.iter().any(|(f, t1)| {
        f2.iter().find(|(g, _)| g == f).is_some_and(|(_, t2)| {
            let mut ls = BTreeSet::new();
            t1.base.locs_into(&mut ls);
            t2.base.locs_into(&mut ls);
            ls.len() > 1
        })
    })
}

/// One `pad` per location of `target` missing from `sigma`, in order.
pub fn pad_locs(sigma: &Heap, target: &Heap) -> Vec<StmtKind> {
    let missing: BTreeSet<Loc> = target.dom().into_iter().filter(|l| !sigma.contains(l)).collect();
    missing.into_iter().map(|loc| StmtKind::Pad { loc, ghost: None }).collect()
}

/// Insert the heap annotations every function of `p` needs. Annotations
/// already present are kept, so elaborating twice changes nothing.
pub fn elaborate(p: &Program) -> Result<Program, CgenError> {
    let ctx = Ctx::physical(p);
    let mut el = Elab { eng: Engine::new(&ctx, Mode::Physical, Options::default()) };
    let mut out = p.clone();
    for f in out.functions.iter_mut() {
        let mut w = el.eng.enter(f)?;
        let mut body = el.block(&mut w, &f.body)?;
        if !w.dead {
            el.eng.span = f.span;
            if el.eng.schema.out.is_none() {
                el.before_return(&mut w, None, &mut body, f.span)?;
            }
            el.eng.finish(&mut w, f)?;
        }
        f.body = body;
    }
    Ok(out)
}

struct Elab<'c> {
    eng: Engine<'c>,
}

impl Elab<'_> {
    /// Run an inserted annotation and append it.
    fn insert(&mut self, w: &mut World, k: StmtKind, next: Option<&StmtKind>, out: &mut Vec<Stmt>, span: Span) -> Result<(), CgenError> {
        self.eng.step(w, &k, next)?;
        out.push(Stmt { kind: k.without_ghosts(), span });
        Ok(())
    }

    fn block(&mut self, w: &mut World, b: &[Stmt]) -> Result<Vec<Stmt>, CgenError> {
        let mut out: Vec<Stmt> = Vec::new();
        for (i, s) in b.iter().enumerate() {
            if w.dead {
                out.push(s.clone());
                continue;
            }
            self.eng.span = s.span;
            let next = b[i + 1..].iter().find(|n| !n.kind.is_annotation()).map(|n| &n.kind);
            match &s.kind {
                StmtKind::Read { x, .. } | StmtKind::Write { x, .. } => {
                    let (t, l) = self.eng.pointer_of(w, x)?;
                    let has_conc = out
                        .iter()
                        .rev()
                        .take_while(|p| p.kind.is_annotation())
                        .any(|p| matches!(&p.kind, StmtKind::Conc { x: y, .. } if y == x));
                    if matches!(t.base, Base::MaybeRef(_)) && !has_conc {
                        self.insert(w, StmtKind::Conc { x: x.clone(), ghost: None }, Some(&s.kind), &mut out, s.span)?;
                    }
                    if !w.is_pad(&l) {
                        let (us, _) = unfold_list(x, &w.env, &w.heap, &w.unfolded).map_err(|m| self.eng.err(m))?;
                        for k in us {
                            self.insert(w, k, Some(&s.kind), &mut out, s.span)?;
                        }
                    }
                    self.eng.step(w, &s.kind, next)?;
                    out.push(s.clone());
                }
                StmtKind::Call { f, args, .. } => {
                    self.before_call(w, f, args, &s.kind, &mut out, s.span)?;
                    self.eng.span = s.span;
                    self.eng.step(w, &s.kind, next)?;
                    out.push(s.clone());
                }
                StmtKind::Return(e) => {
                    self.before_return(w, e.as_ref(), &mut out, s.span)?;
                    self.eng.span = s.span;
                    self.eng.step(w, &s.kind, next)?;
                    out.push(s.clone());
                }
                StmtKind::If { cond, then, els } => {
                    let k = self.branch(w, cond, then, els, s.span)?;
                    out.push(Stmt { kind: k, span: s.span });
                }
                _ => {
                    self.eng.step(w, &s.kind, next)?;
                    out.push(s.clone());
                }
            }
        }
        Ok(out)
    }

    fn folds_to(&mut self, w: &mut World, target: &Heap, site: &StmtKind, out: &mut Vec<Stmt>, span: Span) -> Result<(), CgenError> {
        let (folds, _) = fold_list(&w.heap, target, &w.unfolded, &self.eng.ctx.defs).map_err(|cyc| {
            let names: Vec<String> = cyc.iter().map(|l| l.to_string()).collect();
            self.eng.err(format!("cyclic fold dependency among {}", names.join(", ")))
        })?;
        for k in folds {
            self.insert(w, k, Some(site), out, span)?;
        }
        Ok(())
    }

    /// Pads for formal locations no actual location matches, reusing any
    /// pads already in place.
    fn pads_for(&mut self, w: &mut World, unmatched: &[Loc], out: &mut Vec<Stmt>, span: Span) -> Result<(), CgenError> {
        let free = w.pads.len();
        for (i, l) in unmatched.iter().enumerate() {
            if i < free {
                continue;
            }
            let loc = if w.names.has_loc(l) { w.names.fresh_loc(&l.0) } else { l.clone() };
            self.insert(w, StmtKind::Pad { loc, ghost: None }, None, out, span)?;
        }
        Ok(())
    }

    fn before_call(&mut self, w: &mut World, f: &str, args: &[Expr], site: &StmtKind, out: &mut Vec<Stmt>, span: Span) -> Result<(), CgenError> {
        let Some(s) = self.eng.ctx.schemas.get(f).cloned() else { return Ok(()) };
        let bases: Vec<Base> = args.iter().map(|e| self.eng.expr_val(w, e).map(|(b, _)| b)).collect::<Result<_, _>>()?;
        let m = self.eng.match_call(w, &s, &bases);
        let target = located(&s.heap_in, &m.locs);
        self.folds_to(w, &target, site, out, span)?;
        let m = self.eng.match_call(w, &s, &bases);
        self.pads_for(w, &m.unmatched, out, span)
    }

    fn before_return(&mut self, w: &mut World, e: Option<&Expr>, out: &mut Vec<Stmt>, span: Span) -> Result<(), CgenError> {
        let m = self.eng.match_return(w, e)?;
        let target = located(&self.eng.schema.heap_out.clone(), &m.locs);
        let site = StmtKind::Return(e.cloned());
        self.folds_to(w, &target, &site, out, span)?;
        let m = self.eng.match_return(w, e)?;
        self.pads_for(w, &m.unmatched, out, span)
    }

    fn branch(&mut self, w: &mut World, cond: &Expr, then: &[Stmt], els: &[Stmt], span: Span) -> Result<StmtKind, CgenError> {
        let guard = self.eng.cond_pred(w, cond)?;
        let mut w1 = w.clone();
        w1.env.guard(guard.clone());
        let mut t = self.block(&mut w1, then)?;
        let mut w2 = w.clone();
        w2.env.guard(Pred::not(guard));
        let mut e = self.block(&mut w2, els)?;
        self.eng.span = span;

        let alias: BTreeSet<Loc> = if !w1.dead && !w2.dead {
            w.unfolded.keys().filter(|l| alias_check(l, &w1.heap, &w2.heap)).cloned().collect()
        } else {
            BTreeSet::new()
        };
        for (wi, bi) in [(&mut w1, &mut t), (&mut w2, &mut e)] {
            if wi.dead {
                continue;
            }
            let fresh: BTreeSet<Loc> = wi
                .unfolded
                .iter()
                .filter(|(l, c)| w.unfolded.get(*l) != Some(*c))
                .map(|(l, _)| l.clone())
                .chain(alias.iter().filter(|l| wi.unfolded.contains_key(*l)).cloned())
                .collect();
            let mut deps: BTreeMap<Loc, BTreeSet<Loc>> = BTreeMap::new();
            for l in &fresh {
                if let Some(Base::Record(fs)) = wi.heap.get(l).map(|b| &b.ty.base) {
                    for (_, ft) in fs {
                        if let Some(m) = ft.base.loc().filter(|m| fresh.contains(*m)) {
                            deps.entry(l.clone()).or_default().insert(m.clone());
                        }
                    }
                }
            }
            let order = fold_order(&fresh, &deps).map_err(|cyc| {
                let names: Vec<String> = cyc.iter().map(|l| l.to_string()).collect();
                self.eng.err(format!("cyclic fold dependency among {}", names.join(", ")))
            })?;
            let end = bi.last().map(|s| s.span).unwrap_or(span);
            for loc in order {
                if matches!(wi.heap.get(&loc).map(|b| &b.ty.base), Some(Base::Record(_))) {
                    self.eng.span = end;
                    self.insert(wi, StmtKind::Fold { loc, ghost: None }, None, bi, end)?;
                }
            }
        }
        if !w1.dead && !w2.dead {
            let (h1, h2) = (w1.heap.clone(), w2.heap.clone());
            for (wi, bi, other) in [(&mut w1, &mut t, &h2), (&mut w2, &mut e, &h1)] {
                let end = bi.last().map(|s| s.span).unwrap_or(span);
                for k in pad_locs(&wi.heap, other) {
                    self.eng.span = end;
                    self.insert(wi, k, None, bi, end)?;
                }
            }
        }
        self.eng.span = span;
        *w = self.eng.join(w, w1, w2)?;
        Ok(StmtKind::If { cond: cond.clone(), then: t, els: e })
    }
}

/// Entries of a formal heap placed at the actual locations they match.
fn located(h: &Heap, locs: &BTreeMap<Loc, Loc>) -> Heap {
    let s = Subst { locs: locs.clone(), ..Subst::new() };
    Heap(h.0.iter().filter(|b| locs.contains_key(&b.loc)).map(|b| {
        let mut b = b.clone();
        b.loc = s.loc(&b.loc);
        b.ty = b.ty.subst(&s);
        b
    }).collect())
}
