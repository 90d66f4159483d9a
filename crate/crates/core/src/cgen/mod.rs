//! Constraint generation by type-directed symbolic execution.
//!
//! One engine serves two modes. `Physical` checks only the alias
//! discipline (refinements erased) and is what annotation inference runs
//! on; `Refined` additionally emits Horn clauses over κ templates.

mod stmt;
mod sub;
pub mod template;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::*;

pub use sub::{join_base, unify_base};
pub use template::{mk_templates, name_fields};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Physical,
    Refined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Options {
    /// Split the check of a `?ref` field into `ν≠null` and `ν=null` cases
    /// when folding, and descend into the pointed-to cell only in the first.
    pub fold_null_guard: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { fold_null_guard: true }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{func}: {span}: {msg}")]
pub struct CgenError {
    pub func: String,
    pub span: Span,
    pub msg: String,
}

/// Machine state at a program point: Γ, Σ and the bookkeeping that the
/// typing rules leave implicit.
#[derive(Clone, Debug, Default)]
pub struct World {
    pub env: TypeEnv,
    pub heap: Heap,
    pub names: NameGen,
    /// Locations currently holding an unfolded instance of a constructor.
    pub unfolded: BTreeMap<Loc, String>,
    /// Padded locations whose type is fixed at first use.
    pub pads: BTreeSet<Loc>,
    /// After a return.
    pub dead: bool,
}

impl World {
    pub fn is_pad(&self, l: &Loc) -> bool {
        self.pads.contains(l)
    }

    /// Entry at `l` unless it is an unmaterialized pad.
    pub fn cell(&self, l: &Loc) -> Option<&HeapBind> {
        if self.is_pad(l) {
            None
        } else {
            self.heap.get(l)
        }
    }

    /// Γ bindings then heap binders, with sorts. This is the scope of any
    /// κ created at this point.
    pub fn scope(&self) -> Vec<(Var, Sort)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for item in &self.env.0 {
            if let EnvItem::Bind(x, t) = item {
                if seen.insert(x.clone()) {
                    out.push((x.clone(), Sort::of_base(&t.base)));
                }
            }
        }
        for b in &self.heap.0 {
            if !self.is_pad(&b.loc) && seen.insert(b.binder.clone()) {
                out.push((b.binder.clone(), Sort::of_base(&b.ty.base)));
            }
        }
        out
    }

    /// Bound in Γ or naming a live heap cell, so its facts are in the
    /// clause environment.
    pub fn knows(&self, v: &Var) -> bool {
        self.env.lookup(v).is_some() || self.heap.0.iter().any(|b| &b.binder == v && !self.is_pad(&b.loc))
    }

    pub fn type_of_binder(&self, v: &Var) -> Option<&RType> {
        self.env.lookup(v).or_else(|| self.heap.0.iter().find(|b| &b.binder == v).map(|b| &b.ty))
    }

    /// Follow binders whose type is exactly `{ν = w}`.
    pub fn resolve(&self, v: &Var) -> Var {
        let mut cur = v.clone();
        for _ in 0..64 {
            match self.type_of_binder(&cur).map(|t| &t.pred) {
                Some(Pred::Rel(Rel::Eq, Term::Var(n), Term::Var(w))) if n.is_nu() && w != &cur => cur = w.clone(),
                _ => break,
            }
        }
        cur
    }

    /// Record a heap entry that leaves Σ: its snapshot stays a valid
    /// logical value. Folded structures go into Γ; cells keep their facts
    /// only under `&ℓ≠null`.
    pub fn retire(&mut self, b: HeapBind) {
        if self.is_pad(&b.loc) || self.env.lookup(&b.binder).is_some() {
            return;
        }
        if matches!(b.ty.base, Base::App(..)) {
            let _ = self.env.bind(b.binder.clone(), b.ty.clone());
            self.env.guard(Pred::imp(
                Pred::eq(Term::Loc(b.loc.clone()), Term::Null),
                Pred::eq(Term::Var(b.binder.clone()), Term::Null),
            ));
        } else {
            let e = embed(&Term::Var(b.binder.clone()), &b.ty);
            if !e.is_true() {
                self.env.guard(Pred::imp(Pred::ne(Term::Loc(b.loc.clone()), Term::Null), e));
            }
        }
    }
}

/// Program-wide read-only inputs.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub defs: Vec<TypeDef>,
    pub measures: Vec<Measure>,
    pub schemas: BTreeMap<String, Schema>,
}

impl Ctx {
    /// Declared schemas with every refinement erased.
    pub fn physical(p: &Program) -> Ctx {
        let schemas = p.functions.iter().map(|f| (f.name.clone(), f.schema.erase())).collect();
        Ctx::with_schemas(p, schemas)
    }

    pub fn with_schemas(p: &Program, mut schemas: BTreeMap<String, Schema>) -> Ctx {
        schemas.entry(crate::frontend::parser::ASSERT.to_string()).or_insert_with(assert_schema);
        Ctx { defs: p.resolved_typedefs(), measures: p.measures.clone(), schemas }
    }

    pub fn def(&self, c: &str) -> Option<&TypeDef> {
        self.defs.iter().find(|d| d.name == c)
    }

    pub fn measure(&self, m: &str) -> Option<&Measure> {
        self.measures.iter().find(|d| d.name == m)
    }
}

/// `assert : (b:{ν:bool | ν}) => void`
pub fn assert_schema() -> Schema {
    Schema {
        params: vec![(Var::new("b"), RType::new(Base::Bool, Pred::BVar(Term::nu())))],
        ..Schema::default()
    }
}

/// Facts a binding `x:t` contributes: the refinement at `x`, the location
/// anchor of pointer types, and the same for record fields at `Field(x,f)`.
pub fn embed(x: &Term, t: &RType) -> Pred {
    let mut ps = vec![t.pred.at(x), anchor(x, &t.base)];
    if let Base::Record(fs) = &t.base {
        for (f, ft) in fs {
            ps.push(embed(&Term::field(x.clone(), f), ft));
        }
    }
    tidy(&Pred::and(ps))
}

/// `ref(ℓ)`: `x = &ℓ ∧ x ≠ null`; `?ref(ℓ)`: `x = &ℓ`; `null`: `x = null`.
pub fn anchor(x: &Term, b: &Base) -> Pred {
    match b {
        Base::Ref(l) => Pred::and([
            Pred::eq(x.clone(), Term::Loc(l.clone())),
            Pred::ne(x.clone(), Term::Null),
        ]),
        Base::MaybeRef(l) => Pred::eq(x.clone(), Term::Loc(l.clone())),
        Base::Null => Pred::eq(x.clone(), Term::Null),
        _ => Pred::True,
    }
}

/// Simplify, dropping duplicate conjuncts and those of the form `t = t`.
pub fn tidy(p: &Pred) -> Pred {
    let mut seen = Vec::new();
    for q in p.simplify().conjuncts() {
        let trivial = match &q {
            Pred::Rel(Rel::Eq, a, b) => a == b,
            Pred::Iff(a, b) => a == b,
            _ => false,
        };
        if !trivial && !seen.contains(&q) {
            seen.push(q);
        }
    }
    Pred::and(seen)
}

/// Facts of one heap entry.
pub fn heap_fact(b: &HeapBind) -> Vec<Pred> {
    let y = Term::Var(b.binder.clone());
    let e = embed(&y, &b.ty);
    let at = Term::Loc(b.loc.clone());
    if matches!(b.ty.base, Base::App(..)) {
        let mut v = e.conjuncts();
        v.push(Pred::imp(Pred::eq(at, Term::Null), Pred::eq(y, Term::Null)));
        v
    } else if e.is_true() {
        vec![]
    } else {
        vec![Pred::imp(Pred::ne(at, Term::Null), e)]
    }
}

/// Embedding of a whole world, in order: Γ, then Σ.
pub fn world_facts(w: &World) -> Vec<Pred> {
    let mut out = Vec::new();
    for item in &w.env.0 {
        match item {
            EnvItem::Bind(x, t) => out.extend(embed(&Term::Var(x.clone()), t).conjuncts()),
            EnvItem::Guard(p) => out.extend(tidy(p).conjuncts()),
        }
    }
    for b in &w.heap.0 {
        if !w.is_pad(&b.loc) {
            out.extend(heap_fact(b));
        }
    }
    out
}

fn dedup(ps: Vec<Pred>) -> Vec<Pred> {
    let mut out: Vec<Pred> = Vec::with_capacity(ps.len());
    for p in ps {
        if !p.is_true() && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Replace `m(null)` by the measure's null case.
pub(crate) fn null_measures(t: &Term, ms: &[Measure]) -> Term {
    match t {
        Term::Meas(m, a) => {
            let a = null_measures(a, ms);
            match (&a, ms.iter().find(|x| &x.name == m)) {
                (Term::Null, Some(d)) => d.null_case.clone(),
                _ => Term::Meas(m.clone(), Box::new(a)),
            }
        }
        Term::Bin(o, a, b) => Term::Bin(*o, Box::new(null_measures(a, ms)), Box::new(null_measures(b, ms))),
        Term::Field(a, f) => Term::Field(Box::new(null_measures(a, ms)), f.clone()),
        Term::Ite(c, a, b) => Term::Ite(
            Box::new(c.map_terms(&|t| null_measures(t, ms))),
            Box::new(null_measures(a, ms)),
            Box::new(null_measures(b, ms)),
        ),
        t => t.clone(),
    }
}

/// Result of generating constraints for a whole program.
#[derive(Clone, Debug)]
pub struct Generated {
    pub cs: ConstraintSet,
    /// Schemas with κ templates at every unrefined output position.
    pub schemas: BTreeMap<String, Schema>,
    /// Function bodies with ghost names filled in.
    pub bodies: BTreeMap<String, Vec<Stmt>>,
}

/// Template all schemas, then generate clauses for every function. The
/// program must already carry its heap annotations.
pub fn generate(p: &Program, opts: Options) -> Result<Generated, CgenError> {
    let mut kappas = KappaGen::new();
    let mut cs = ConstraintSet::new();
    let mut schemas = BTreeMap::new();
    for f in &p.functions {
        schemas.insert(f.name.clone(), mk_templates(&f.schema, &f.name, &mut kappas, &mut cs.scopes));
    }
    generate_with(p, schemas, kappas, cs, opts)
}

/// Generate clauses against fixed schemas.
pub fn generate_with(
    p: &Program,
    schemas: BTreeMap<String, Schema>,
    kappas: KappaGen,
    cs: ConstraintSet,
    opts: Options,
) -> Result<Generated, CgenError> {
    let ctx = Ctx::with_schemas(p, schemas.clone());
    let mut eng = Engine::new(&ctx, Mode::Refined, opts);
    eng.kappas = kappas;
    eng.cs = cs;
    let mut bodies = BTreeMap::new();
    for f in &p.functions {
        bodies.insert(f.name.clone(), eng.check_function(f)?);
    }
    let mut schemas = schemas;
    schemas.remove(crate::frontend::parser::ASSERT);
    Ok(Generated { cs: eng.cs, schemas, bodies })
}

/// Alias-type check only; returns bodies with ghost names filled in.
pub fn check_physical(p: &Program) -> Result<BTreeMap<String, Vec<Stmt>>, CgenError> {
    let ctx = Ctx::physical(p);
    let mut eng = Engine::new(&ctx, Mode::Physical, Options::default());
    let mut out = BTreeMap::new();
    for f in &p.functions {
        out.insert(f.name.clone(), eng.check_function(f)?);
    }
    Ok(out)
}

pub struct Engine<'c> {
    pub ctx: &'c Ctx,
    pub mode: Mode,
    pub opts: Options,
    pub kappas: KappaGen,
    pub cs: ConstraintSet,
    /// Capture the world before the first statement of this function on
    /// this line into `probed`.
    pub probe: Option<(String, u32)>,
    pub probed: Option<World>,
    pub(crate) func: String,
    pub(crate) schema: Schema,
    pub(crate) span: Span,
    /// Extra provenance for clauses emitted by the current statement.
    pub(crate) note: String,
}

impl<'c> Engine<'c> {
    pub fn new(ctx: &'c Ctx, mode: Mode, opts: Options) -> Engine<'c> {
        Engine {
            ctx,
            mode,
            opts,
            kappas: KappaGen::new(),
            cs: ConstraintSet::new(),
            probe: None,
            probed: None,
            func: String::new(),
            schema: Schema::default(),
            span: Span::default(),
            note: String::new(),
        }
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> CgenError {
        CgenError { func: self.func.clone(), span: self.span, msg: msg.into() }
    }

    pub(crate) fn refined(&self) -> bool {
        self.mode == Mode::Refined
    }

    /// Γ and Σ on entry to `f`, with every name occurring in it reserved.
    pub fn enter(&mut self, f: &Function) -> Result<World, CgenError> {
        self.func = f.name.clone();
        self.span = f.span;
        self.schema = self
            .ctx
            .schemas
            .get(&f.name)
            .cloned()
            .ok_or_else(|| self.err(format!("no schema for `{}`", f.name)))?;
        let mut w = World::default();
        for v in self.schema.bound_vars().iter().chain(f.params.iter()).chain(f.synthetic.iter()) {
            w.names.reserve_var(v);
        }
        for l in self.schema.locs.iter().chain(self.schema.heap_in.dom().iter()) {
            w.names.reserve_loc(l);
        }
        walk_stmts(&f.body, &mut |s| {
            let mut vs = BTreeSet::new();
            match &s.kind {
                StmtKind::Assign { x, e } => {
                    vs.insert(x.clone());
                    e.vars_into(&mut vs);
                }
                StmtKind::Read { y, x, .. } => {
                    vs.insert(y.clone());
                    vs.insert(x.clone());
                }
                StmtKind::Write { x, e, .. } => {
                    vs.insert(x.clone());
                    e.vars_into(&mut vs);
                }
                StmtKind::Alloc { x, fields, .. } => {
                    vs.insert(x.clone());
                    fields.iter().for_each(|(_, e)| e.vars_into(&mut vs));
                }
                StmtKind::Call { x, args, .. } => {
                    vs.extend(x.iter().cloned());
                    args.iter().for_each(|e| e.vars_into(&mut vs));
                }
                StmtKind::If { cond, .. } => cond.vars_into(&mut vs),
                StmtKind::Return(Some(e)) => e.vars_into(&mut vs),
                StmtKind::Conc { x, .. } => {
                    vs.insert(x.clone());
                }
                _ => {}
            }
            vs.iter().for_each(|v| w.names.reserve_var(v));
        });
        for (x, t) in &self.schema.params {
            w.env.bind(x.clone(), t.clone()).map_err(|x| self.err(format!("parameter `{x}` bound twice")))?;
        }
        w.heap = self.schema.heap_in.clone();
        Ok(w)
    }

    /// Check one function body. Returns the body with ghosts filled in.
    pub fn check_function(&mut self, f: &Function) -> Result<Vec<Stmt>, CgenError> {
        let mut w = self.enter(f)?;
        let body = self.exec_block(&mut w, &f.body)?;
        self.finish(&mut w, f)?;
        Ok(body)
    }

    /// Implicit `return;` at the end of a void body.
    pub fn finish(&mut self, w: &mut World, f: &Function) -> Result<(), CgenError> {
        if w.dead {
            return Ok(());
        }
        self.span = f.span;
        if self.schema.out.is_some() {
            return Err(self.err(format!("`{}` can reach the end of its body without returning a value", f.name)));
        }
        self.ret(w, None)
    }

    /// Execute a block, returning it with ghosts filled in.
    pub fn exec_block(&mut self, w: &mut World, b: &[Stmt]) -> Result<Vec<Stmt>, CgenError> {
        let mut out = Vec::with_capacity(b.len());
        for (i, s) in b.iter().enumerate() {
            if w.dead {
                out.push(s.clone());
                continue;
            }
            if self.probed.is_none() && self.probe.as_ref().is_some_and(|(f, l)| *f == self.func && *l == s.span.line) {
                self.probed = Some(w.clone());
            }
            self.span = s.span;
            self.note.clear();
            let kind = match &s.kind {
                StmtKind::If { cond, then, els } => {
                    let guard = self.cond_pred(w, cond)?;
                    let mut w1 = w.clone();
                    w1.env.guard(guard.clone());
                    let t = self.exec_block(&mut w1, then)?;
                    let mut w2 = w.clone();
                    w2.env.guard(Pred::not(guard));
                    let e = self.exec_block(&mut w2, els)?;
                    self.span = s.span;
                    *w = self.join(w, w1, w2)?;
                    StmtKind::If { cond: cond.clone(), then: t, els: e }
                }
                _ => {
                    let next = b[i + 1..].iter().find(|n| !n.kind.is_annotation()).map(|n| &n.kind);
                    self.step(w, &s.kind, next)?
                }
            };
            out.push(Stmt { kind, span: s.span });
        }
        Ok(out)
    }

    /// Clause environment for `w` plus extra hypotheses.
    pub(crate) fn env_of(&self, w: &World, extra: &[Pred]) -> Vec<Pred> {
        let mut ps = world_facts(w);
        for e in extra {
            ps.extend(tidy(e).conjuncts());
        }
        dedup(ps.iter().map(|p| self.restrict(p)).collect())
    }

    /// Drop pending substitutions on names outside each κ's scope.
    pub(crate) fn restrict(&self, p: &Pred) -> Pred {
        p.map_kapps(&|k, s| match self.cs.scopes.get(&k) {
            Some(sc) => Pred::K(k, s.restrict(&sc.var_set())),
            None => Pred::K(k, s.clone()),
        })
    }

    /// `⟦w⟧ ∧ extra ⊢ body ⇒ head`, one clause per head conjunct. Heads
    /// that are trivially true or already among the body's conjuncts are
    /// dropped.
    pub(crate) fn emit(&mut self, w: &World, extra: &[Pred], body: Pred, head: Pred, nu: Sort, rule: &str) {
        if !self.refined() {
            return;
        }
        let body = tidy(&body);
        let bc = body.conjuncts();
        let mut env = None;
        for h in tidy(&head).conjuncts() {
            if !h.has_kvar() && (bc.contains(&h) || extra.contains(&h)) {
                continue;
            }
            let env = env.get_or_insert_with(|| self.env_of(w, extra)).clone();
            let c = Clause {
                id: 0,
                env,
                body: self.restrict(&body),
                head: self.restrict(&h),
                nu_sort: nu.clone(),
                prov: Prov { func: self.func.clone(), rule: rule.to_string(), span: self.span, note: self.note.clone() },
            };
            self.cs.push(c);
        }
    }

    pub(crate) fn fresh_k(&mut self, scope: &[(Var, Sort)], nu: Sort, origin: &str) -> Pred {
        if !self.refined() {
            return Pred::True;
        }
        let k = self.kappas.fresh();
        self.cs.scopes.insert(
            k,
            KScope { k, nu, vars: scope.to_vec(), origin: format!("{} {origin} at {}", self.func, self.span) },
        );
        Pred::kapp(k)
    }

    /// Shape of `b` with a fresh κ at every scalar and application
    /// position (inner positions first). Erased in physical mode.
    pub(crate) fn template(&mut self, b: &Base, scope: &[(Var, Sort)], origin: &str) -> RType {
        match b {
            Base::Record(fs) => RType::plain(Base::Record(
                fs.iter().map(|(f, t)| (f.clone(), self.template(&t.base, scope, origin))).collect(),
            )),
            Base::App(c, ts) => {
                let args = ts.iter().map(|t| self.template(&t.base, scope, origin)).collect();
                let k = self.fresh_k(scope, Sort::Snap(c.clone()), origin);
                RType::new(Base::App(c.clone(), args), k)
            }
            Base::Int | Base::Bool => {
                let k = self.fresh_k(scope, Sort::of_base(b), origin);
                RType::new(b.clone(), k)
            }
            b => RType::plain(b.erase()),
        }
    }

    pub(crate) fn def(&self, c: &str) -> Result<&'c TypeDef, CgenError> {
        self.ctx.def(c).ok_or_else(|| self.err(format!("unknown type constructor `{c}`")))
    }

    /// `⋀ m(subj) = body_m` over the measures of `d`, with field
    /// projections of the measure parameter replaced by `field(f)`.
    pub(crate) fn measure_facts(&self, d: &TypeDef, subj: &Term, field: &dyn Fn(&str) -> Term) -> Pred {
        Pred::and(d.measures.iter().map(|m| {
            let body = m.rec_case.map_fields_of(&m.param, field);
            let body = null_measures(&body, &self.ctx.measures).simplify();
            Pred::eq(Term::meas(&m.name, subj.clone()), body)
        }))
    }
}
