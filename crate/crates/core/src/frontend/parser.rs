use std::collections::{BTreeMap, BTreeSet};

use crate::model::*;

use super::lexer::{lex, Tok, Token};
use super::Diagnostic;

type PResult<T> = Result<T, Diagnostic>;

/// Name of the built-in assertion function.
pub const ASSERT: &str = "assert";

pub fn parse_program(src: &str) -> Result<Program, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut ctors = BTreeSet::new();
    for w in toks.windows(2) {
        if let (Tok::Ident(k), Tok::Ident(n)) = (&w[0].tok, &w[1].tok) {
            if k == "type" {
                ctors.insert(n.clone());
            }
        }
    }
    let mut p = P::new(&toks, ctors);
    p.program().map_err(|d| vec![d])
}

pub fn parse_qualifiers(src: &str) -> Result<Vec<Qualifier>, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = P::new(&toks, BTreeSet::new());
    p.qualifiers().map_err(|d| vec![d])
}

/// Parse a standalone refinement type (used by tests and tools).
pub fn parse_rtype(src: &str, ctors: &[&str]) -> Result<RType, Diagnostic> {
    let toks = lex(src)?;
    let mut p = P::new(&toks, ctors.iter().map(|s| s.to_string()).collect());
    let t = p.rtype()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parse a standalone predicate; `v` denotes the value variable.
pub fn parse_pred(src: &str) -> Result<Pred, Diagnostic> {
    let toks = lex(src)?;
    let mut p = P::new(&toks, BTreeSet::new());
    p.nu_name = Some("v".into());
    let q = p.pred()?;
    p.expect_eof()?;
    Ok(q)
}

/// Surface expression before operands are made pure.
#[derive(Clone, Debug)]
enum SExpr {
    Int(i64),
    Bool(bool),
    Null,
    Var(Var),
    Bin(BinOp, Box<SExpr>, Box<SExpr>),
    Not(Box<SExpr>),
    Neg(Box<SExpr>),
    Proj(Box<SExpr>, String),
    Call(String, Vec<SExpr>),
    Record(Vec<(String, SExpr)>),
}

struct FnCtx {
    next: u32,
    avoid: BTreeSet<String>,
    synthetic: BTreeSet<Var>,
}

struct P<'a> {
    toks: &'a [Token],
    pos: usize,
    ctors: BTreeSet<String>,
    nu_name: Option<String>,
    wildcards: Option<Vec<(String, SortPat)>>,
    fnctx: Option<FnCtx>,
}

const RELOPS: &[&str] = &["=", "==", "!=", "<=", "<", ">=", ">"];

impl<'a> P<'a> {
    fn new(toks: &'a [Token], ctors: BTreeSet<String>) -> P<'a> {
        P { toks, pos: 0, ctors, nu_name: None, wildcards: None, fnctx: None }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::new(self.span(), msg)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Span> {
        if self.is_sym(s) {
            Ok(self.bump().span)
        } else {
            Err(self.err(format!("expected `{s}`, found {}", describe(self.peek()))))
        }
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<Span> {
        if self.is_kw(k) {
            Ok(self.bump().span)
        } else {
            Err(self.err(format!("expected `{k}`, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            t => Err(self.err(format!("expected identifier, found {}", describe(&t)))),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            t => Err(self.err(format!("unexpected {}", describe(t)))),
        }
    }

    fn loc(&mut self) -> PResult<Loc> {
        self.eat_sym("&");
        Ok(Loc::new(self.ident()?.0))
    }

    // ---------------------------------------------------------------- items

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        let mut seen_types = BTreeSet::new();
        let mut seen_meas = BTreeSet::new();
        let mut seen_fns = BTreeSet::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(k) if k == "type" => {
                    let sp = self.span();
                    let d = self.typedef()?;
                    if !seen_types.insert(d.name.clone()) {
                        return Err(Diagnostic::new(sp, format!("duplicate type `{}`", d.name)));
                    }
                    prog.typedefs.push(d);
                }
                Tok::Ident(k) if k == "measure" => {
                    let sp = self.span();
                    let m = self.measure()?;
                    if !seen_meas.insert(m.name.clone()) {
                        return Err(Diagnostic::new(sp, format!("duplicate measure `{}`", m.name)));
                    }
                    prog.measures.push(m);
                }
                Tok::Ident(k) if k == "forall" => self.schema_and_function(&mut prog, &mut seen_fns)?,
                Tok::Sym("(") => self.schema_and_function(&mut prog, &mut seen_fns)?,
                Tok::Ident(k) if k == "function" => {
                    self.bump();
                    let (name, sp) = self.ident()?;
                    return Err(Diagnostic::new(sp, format!("function `{name}` has no signature")));
                }
                t => return Err(self.err(format!("expected a type, measure, signature or function, found {}", describe(&t)))),
            }
        }
        Ok(prog)
    }

    fn schema_and_function(&mut self, prog: &mut Program, seen: &mut BTreeSet<String>) -> PResult<()> {
        let schema = self.schema()?;
        let f = self.function(schema)?;
        if f.name == ASSERT {
            return Err(Diagnostic::new(f.span, "`assert` is built in and cannot be redefined"));
        }
        if !seen.insert(f.name.clone()) {
            return Err(Diagnostic::new(f.span, format!("duplicate function `{}`", f.name)));
        }
        prog.functions.push(f);
        Ok(())
    }

    fn typedef(&mut self) -> PResult<TypeDef> {
        self.expect_kw("type")?;
        let (name, _) = self.ident()?;
        let mut params = Vec::new();
        if self.eat_sym("[") {
            params = self.comma_idents("]")?;
            self.expect_sym("]")?;
        }
        self.expect_sym("=")?;
        let mut locs = Vec::new();
        let mut heap = Heap::emp();
        if self.eat_kw("exists") {
            self.expect_sym("!")?;
            locs = self.comma_idents("=>")?.into_iter().map(Loc::new).collect();
            self.expect_sym("=>")?;
            let mut raw = Vec::new();
            loop {
                let full = matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Sym("|->")
                    || self.is_sym("&");
                if full {
                    raw.extend(self.heap_raw()?);
                } else {
                    // shorthand `t:T` binds the existential locations in order
                    let sp = self.span();
                    let l = locs.get(raw.len()).cloned().ok_or_else(|| {
                        Diagnostic::new(sp, "more heap bindings than existential locations")
                    })?;
                    let (b, _) = self.ident()?;
                    self.expect_sym(":")?;
                    raw.push((l, Some(Var::new(b)), self.rtype()?));
                }
                if !self.eat_sym("*") {
                    break;
                }
            }
            heap = self.fill_binders(raw, &mut NameGen::new())?;
            self.expect_sym(".")?;
        }
        let (root, _) = self.ident()?;
        self.expect_sym(":")?;
        let root_ty = self.rtype()?;
        self.eat_sym(";");
        Ok(TypeDef { name, params, locs, heap, root: Var::new(root), root_ty, measures: vec![] })
    }

    fn comma_idents(&mut self, stop: &str) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        if self.is_sym(stop) {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?.0);
            if !self.eat_sym(",") {
                break;
            }
        }
        Ok(out)
    }

    fn meas_sort(&mut self) -> PResult<MeasSort> {
        let (s, sp) = self.ident()?;
        match s.as_str() {
            "int" => Ok(MeasSort::Int),
            "bool" => Ok(MeasSort::Bool),
            _ => Err(Diagnostic::new(sp, format!("measure result sort must be int or bool, found `{s}`"))),
        }
    }

    fn measure(&mut self) -> PResult<Measure> {
        self.expect_kw("measure")?;
        let (name, _) = self.ident()?;
        if self.eat_sym(":") {
            let (ctor, _) = self.ident()?;
            self.expect_sym("=>")?;
            let sort = self.meas_sort()?;
            self.expect_sym("{")?;
            let mut null_case = None;
            let mut rec = None;
            while !self.eat_sym("}") {
                let (n, sp) = self.ident()?;
                if n != name {
                    return Err(Diagnostic::new(sp, format!("equation for `{n}` inside measure `{name}`")));
                }
                self.expect_sym("(")?;
                if self.eat_kw("null") {
                    self.expect_sym(")")?;
                    self.expect_sym("=")?;
                    null_case = Some(self.term()?);
                } else {
                    let (x, _) = self.ident()?;
                    self.expect_sym(")")?;
                    self.expect_sym("=")?;
                    rec = Some((Var::new(x), self.term()?));
                }
                self.eat_sym(";");
            }
            self.eat_sym(";");
            let sp = self.prev_span();
            let null_case = null_case.ok_or_else(|| Diagnostic::new(sp, format!("measure `{name}` has no null case")))?;
            let (param, rec_case) =
                rec.ok_or_else(|| Diagnostic::new(sp, format!("measure `{name}` has no record case")))?;
            Ok(Measure { name, ctor, param, sort, null_case, rec_case })
        } else {
            self.expect_sym("(")?;
            let (x, _) = self.ident()?;
            self.expect_sym(":")?;
            let (ctor, _) = self.ident()?;
            self.expect_sym(")")?;
            self.expect_sym(":")?;
            let sort = self.meas_sort()?;
            self.expect_sym("=")?;
            let sp = self.span();
            self.expect_kw("if")?;
            let c = self.pred()?;
            let ok = matches!(&c, Pred::Rel(Rel::Eq, Term::Var(v), Term::Null) if v.0 == x);
            if !ok {
                return Err(Diagnostic::new(sp, format!("measure body must test `{x} == null`")));
            }
            self.expect_kw("then")?;
            let null_case = self.term()?;
            self.expect_kw("else")?;
            let rec_case = self.term()?;
            self.eat_sym(";");
            Ok(Measure { name, ctor, param: Var::new(x), sort, null_case, rec_case })
        }
    }

    fn schema(&mut self) -> PResult<Schema> {
        let mut tvars = Vec::new();
        if self.eat_kw("forall") {
            tvars = self.comma_idents(".")?;
            self.expect_sym(".")?;
        }
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                let (x, _) = self.ident()?;
                self.expect_sym(":")?;
                params.push((Var::new(x), self.rtype()?));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let heap_in = if self.eat_sym("/") { self.heap_raw()? } else { vec![] };
        self.expect_sym("=>")?;
        let mut explicit_out = None;
        if self.eat_kw("exists") {
            explicit_out = Some(self.comma_idents(".")?.into_iter().map(Loc::new).collect::<Vec<_>>());
            self.expect_sym(".")?;
        }
        let out = if self.eat_kw("void") {
            None
        } else if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Sym(":") {
            let (x, _) = self.ident()?;
            self.expect_sym(":")?;
            Some((Some(Var::new(x)), self.rtype()?))
        } else {
            Some((None, self.rtype()?))
        };
        let heap_out = if self.eat_sym("/") { self.heap_raw()? } else { vec![] };

        let mut gen = NameGen::new();
        for (x, _) in &params {
            gen.reserve_var(x);
        }
        for (_, b, _) in heap_in.iter().chain(heap_out.iter()) {
            if let Some(b) = b {
                gen.reserve_var(b);
            }
        }
        if let Some((Some(x), _)) = &out {
            gen.reserve_var(x);
        }
        let heap_in = self.fill_binders(heap_in, &mut gen)?;
        let heap_out = self.fill_binders(heap_out, &mut gen)?;
        let out = out.map(|(x, t)| (x.unwrap_or_else(|| gen.fresh_var("r")), t));

        let mut locs: Vec<Loc> = Vec::new();
        let push = |l: Loc, v: &mut Vec<Loc>| {
            if !v.contains(&l) {
                v.push(l)
            }
        };
        for (_, t) in &params {
            for l in t.locs() {
                push(l, &mut locs);
            }
        }
        for b in &heap_in.0 {
            push(b.loc.clone(), &mut locs);
        }
        let out_locs = match explicit_out {
            Some(v) => v,
            None => {
                let mut v = Vec::new();
                if let Some((_, t)) = &out {
                    for l in t.locs() {
                        if !locs.contains(&l) {
                            push(l, &mut v);
                        }
                    }
                }
                for b in &heap_out.0 {
                    if !locs.contains(&b.loc) {
                        push(b.loc.clone(), &mut v);
                    }
                }
                v
            }
        };
        let schema = Schema { locs, tvars, params, heap_in, out_locs, out, heap_out };
        Ok(resolve_pointer_measures(&schema))
    }

    fn function(&mut self, schema: Schema) -> PResult<Function> {
        let start = self.expect_kw("function")?;
        let (name, nsp) = self.ident()?;
        self.expect_sym("(")?;
        let params: Vec<Var> = self.comma_idents(")")?.into_iter().map(Var::new).collect();
        self.expect_sym(")")?;
        let sp: Vec<Var> = schema.params.iter().map(|(x, _)| x.clone()).collect();
        if sp != params {
            return Err(Diagnostic::new(nsp, format!("parameters of `{name}` do not match its signature")));
        }
        // identifiers used anywhere in the body are off limits for temporaries
        let mut avoid = BTreeSet::new();
        let mut depth = 0i32;
        for t in &self.toks[self.pos..] {
            match &t.tok {
                Tok::Sym("{") => depth += 1,
                Tok::Sym("}") => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                Tok::Ident(s) => {
                    avoid.insert(s.clone());
                }
                Tok::Eof => break,
                _ => {}
            }
        }
        self.fnctx = Some(FnCtx { next: 0, avoid, synthetic: BTreeSet::new() });
        let body = self.block()?;
        let ctx = self.fnctx.take().unwrap();
        let end = self.prev_span();
        Ok(Function {
            name,
            params,
            schema,
            body,
            synthetic: ctx.synthetic,
            span: Span { start: start.start, end: end.end, line: start.line, col: start.col },
        })
    }

    // ---------------------------------------------------------------- types

    fn heap_raw(&mut self) -> PResult<Vec<(Loc, Option<Var>, RType)>> {
        let mut out = Vec::new();
        if self.eat_kw("emp") {
            return Ok(out);
        }
        loop {
            let l = self.loc()?;
            self.expect_sym("|->")?;
            let b = if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Sym(":") {
                Some(Var::new(self.ident()?.0))
            } else {
                None
            };
            if b.is_some() {
                self.expect_sym(":")?;
            }
            let t = self.rtype()?;
            out.push((l, b, t));
            if !self.eat_sym("*") {
                break;
            }
        }
        Ok(out)
    }

    fn fill_binders(&self, raw: Vec<(Loc, Option<Var>, RType)>, gen: &mut NameGen) -> PResult<Heap> {
        let binds = raw
            .into_iter()
            .map(|(loc, b, ty)| {
                let binder = b.unwrap_or_else(|| gen.fresh_binder(&loc));
                HeapBind { loc, binder, ty }
            })
            .collect();
        Heap::from_binds(binds).map_err(|e| Diagnostic::new(self.prev_span(), e.to_string()))
    }

    fn rtype(&mut self) -> PResult<RType> {
        if self.is_sym("{") {
            self.bump();
            if self.eat_sym("}") {
                return Ok(RType::plain(Base::Record(vec![])));
            }
            let (x, _) = self.ident()?;
            self.expect_sym(":")?;
            let t = self.rtype()?;
            if self.eat_sym("|") {
                let saved = self.nu_name.replace(x);
                let p = self.pred();
                self.nu_name = saved;
                let p = p?;
                self.expect_sym("}")?;
                if t.pred != Pred::True {
                    return Err(self.err("nested refinement on a refined type"));
                }
                return Ok(RType::new(t.base, p));
            }
            let mut fields = vec![(x, t)];
            while self.eat_sym(",") {
                let (f, sp) = self.ident()?;
                if fields.iter().any(|(g, _)| *g == f) {
                    return Err(Diagnostic::new(sp, format!("duplicate field `{f}`")));
                }
                self.expect_sym(":")?;
                fields.push((f, self.rtype()?));
            }
            self.expect_sym("}")?;
            return Ok(RType::plain(Base::Record(fields)));
        }
        Ok(RType::plain(self.base()?))
    }

    fn base(&mut self) -> PResult<Base> {
        if self.eat_sym("?") {
            self.expect_kw("ref")?;
            self.expect_sym("(")?;
            let l = self.loc()?;
            self.expect_sym(")")?;
            return Ok(Base::MaybeRef(l));
        }
        let (name, sp) = self.ident()?;
        match name.as_str() {
            "int" => Ok(Base::Int),
            "bool" => Ok(Base::Bool),
            "null" => Ok(Base::Null),
            "ref" => {
                self.expect_sym("(")?;
                let l = self.loc()?;
                self.expect_sym(")")?;
                Ok(Base::Ref(l))
            }
            _ => {
                if self.eat_sym("[") {
                    let mut args = Vec::new();
                    if !self.is_sym("]") {
                        loop {
                            args.push(self.rtype()?);
                            if !self.eat_sym(",") {
                                break;
                            }
                        }
                    }
                    self.expect_sym("]")?;
                    Ok(Base::App(name, args))
                } else if self.ctors.contains(&name) {
                    Ok(Base::App(name, vec![]))
                } else if name.starts_with(|c: char| c.is_ascii_alphabetic()) {
                    Ok(Base::TyVar(name))
                } else {
                    Err(Diagnostic::new(sp, format!("bad type `{name}`")))
                }
            }
        }
    }

    // ---------------------------------------------------------------- logic

    fn pred(&mut self) -> PResult<Pred> {
        let a = self.pred_imp()?;
        if self.eat_sym("<=>") {
            let b = self.pred_imp()?;
            return Ok(Pred::Iff(Box::new(a), Box::new(b)));
        }
        Ok(a)
    }

    fn pred_imp(&mut self) -> PResult<Pred> {
        let a = self.pred_or()?;
        if self.eat_sym("=>") {
            let b = self.pred_imp()?;
            return Ok(Pred::Imp(Box::new(a), Box::new(b)));
        }
        Ok(a)
    }

    fn pred_or(&mut self) -> PResult<Pred> {
        let mut v = vec![self.pred_and()?];
        while self.eat_sym("||") {
            v.push(self.pred_and()?);
        }
        Ok(if v.len() == 1 { v.pop().unwrap() } else { Pred::Or(v) })
    }

    fn pred_and(&mut self) -> PResult<Pred> {
        let mut v = vec![self.pred_not()?];
        while self.eat_sym("&&") {
            v.push(self.pred_not()?);
        }
        Ok(if v.len() == 1 { v.pop().unwrap() } else { Pred::And(v) })
    }

    fn pred_not(&mut self) -> PResult<Pred> {
        if self.eat_sym("!") {
            return Ok(Pred::Not(Box::new(self.pred_not()?)));
        }
        self.pred_atom()
    }

    fn is_relop(&self) -> bool {
        RELOPS.iter().any(|r| self.is_sym(r))
    }

    fn pred_atom(&mut self) -> PResult<Pred> {
        if self.is_kw("true") && !self.followed_by_op(1) {
            self.bump();
            return Ok(Pred::True);
        }
        if self.is_kw("false") && !self.followed_by_op(1) {
            self.bump();
            return Ok(Pred::False);
        }
        if self.is_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(p) = self.pred() {
                if self.eat_sym(")") && !self.is_relop() && !self.is_arith() {
                    return Ok(p);
                }
            }
            self.pos = save;
        }
        let a = self.term()?;
        for r in RELOPS {
            if self.is_sym(r) {
                self.bump();
                let b = self.term()?;
                let rel = match *r {
                    "=" | "==" => Rel::Eq,
                    "!=" => Rel::Ne,
                    "<=" => Rel::Le,
                    "<" => Rel::Lt,
                    ">=" => Rel::Ge,
                    _ => Rel::Gt,
                };
                return Ok(Pred::Rel(rel, a, b));
            }
        }
        Ok(Pred::BVar(a))
    }

    fn followed_by_op(&self, k: usize) -> bool {
        matches!(self.peek_at(k), Tok::Sym(s) if RELOPS.contains(s) || ["+", "-", "*"].contains(s))
    }

    fn is_arith(&self) -> bool {
        self.is_sym("+") || self.is_sym("-") || self.is_sym("*")
    }

    fn term(&mut self) -> PResult<Term> {
        let mut a = self.term_prod()?;
        loop {
            let op = if self.eat_sym("+") {
                AOp::Add
            } else if self.eat_sym("-") {
                AOp::Sub
            } else {
                break;
            };
            let b = self.term_prod()?;
            a = Term::Bin(op, Box::new(a), Box::new(b));
        }
        Ok(a)
    }

    fn term_prod(&mut self) -> PResult<Term> {
        let mut a = self.term_unary()?;
        while self.eat_sym("*") {
            let b = self.term_unary()?;
            a = Term::Bin(AOp::Mul, Box::new(a), Box::new(b));
        }
        Ok(a)
    }

    fn term_unary(&mut self) -> PResult<Term> {
        if self.eat_sym("-") {
            let t = self.term_unary()?;
            return Ok(match t {
                Term::Int(n) => Term::Int(-n),
                t => Term::Bin(AOp::Sub, Box::new(Term::Int(0)), Box::new(t)),
            });
        }
        let mut t = self.term_primary()?;
        while self.is_sym(".") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let (f, _) = self.ident()?;
            t = Term::Field(Box::new(t), f);
        }
        Ok(t)
    }

    fn term_primary(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Term::Int(n))
            }
            Tok::Sym("&") => {
                self.bump();
                Ok(Term::Loc(Loc::new(self.ident()?.0)))
            }
            Tok::Sym("~") => {
                let sp = self.span();
                self.bump();
                let (a, _) = self.ident()?;
                let sort = if self.eat_sym(":") { Some(self.sort_pat()?) } else { None };
                let ws = self
                    .wildcards
                    .as_mut()
                    .ok_or_else(|| Diagnostic::new(sp, "wildcards are only allowed in qualifiers"))?;
                match (ws.iter().find(|(n, _)| *n == a), sort) {
                    (None, Some(s)) => ws.push((a.clone(), s)),
                    (None, None) => return Err(Diagnostic::new(sp, format!("wildcard ~{a} needs a sort"))),
                    _ => {}
                }
                Ok(Term::Var(Var::new(format!("~{a}"))))
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.term()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "null" {
                    return Ok(Term::Null);
                }
                if self.eat_sym("(") {
                    if name == "Field" {
                        let t = self.term()?;
                        self.expect_sym(",")?;
                        let (f, _) = self.ident()?;
                        self.expect_sym(")")?;
                        return Ok(Term::Field(Box::new(t), f));
                    }
                    if name == "ite" {
                        let c = self.pred()?;
                        self.expect_sym(",")?;
                        let a = self.term()?;
                        self.expect_sym(",")?;
                        let b = self.term()?;
                        self.expect_sym(")")?;
                        return Ok(Term::Ite(Box::new(c), Box::new(a), Box::new(b)));
                    }
                    let t = self.term()?;
                    self.expect_sym(")")?;
                    return Ok(Term::Meas(name, Box::new(t)));
                }
                if self.nu_name.as_deref() == Some(name.as_str()) {
                    return Ok(Term::nu());
                }
                Ok(Term::Var(Var::new(name)))
            }
            t => Err(self.err(format!("expected a term, found {}", describe(&t)))),
        }
    }

    fn sort_pat(&mut self) -> PResult<SortPat> {
        let (s, _) = self.ident()?;
        Ok(match s.as_str() {
            "int" => SortPat::Is(Sort::Int),
            "bool" => SortPat::Is(Sort::Bool),
            "ptr" => SortPat::Is(Sort::Ptr),
            _ if s.starts_with(|c: char| c.is_ascii_uppercase()) => SortPat::Any(s),
            _ => SortPat::Is(Sort::Snap(s)),
        })
    }

    fn qualifiers(&mut self) -> PResult<Vec<Qualifier>> {
        let mut out = Vec::new();
        while !matches!(self.peek(), Tok::Eof) {
            self.expect_kw("qualif")?;
            let (name, _) = self.ident()?;
            self.expect_sym("(")?;
            let (v, _) = self.ident()?;
            self.expect_sym(":")?;
            let nu_sort = self.sort_pat()?;
            self.expect_sym(")")?;
            self.expect_sym(":")?;
            self.nu_name = Some(v);
            self.wildcards = Some(Vec::new());
            let body = self.pred()?;
            let wildcards = self.wildcards.take().unwrap();
            self.nu_name = None;
            self.eat_sym(";");
            out.push(Qualifier { name, nu_sort, wildcards, body });
        }
        Ok(out)
    }

    // ---------------------------------------------------------------- statements

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.err("unexpected end of input inside block"));
            }
            out.extend(self.stmt()?);
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    fn stmt_or_block(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_sym("{") {
            self.block()
        } else {
            self.stmt()
        }
    }

    fn semi(&mut self) -> PResult<()> {
        if self.eat_sym(";") || self.is_sym("}") || matches!(self.peek(), Tok::AnnotStart) {
            Ok(())
        } else {
            Err(self.err(format!("expected `;`, found {}", describe(self.peek()))))
        }
    }

    fn span_from(&self, start: Span) -> Span {
        let end = self.prev_span();
        Span { start: start.start, end: end.end.max(start.start), line: start.line, col: start.col }
    }

    fn stmt(&mut self) -> PResult<Vec<Stmt>> {
        let start = self.span();
        let mut out = Vec::new();
        match self.peek().clone() {
            Tok::AnnotStart => {
                self.bump();
                loop {
                    if matches!(self.peek(), Tok::AnnotEnd) {
                        self.bump();
                        break;
                    }
                    let s0 = self.span();
                    let (kw, sp) = self.ident()?;
                    self.expect_sym("(")?;
                    let kind = match kw.as_str() {
                        "fold" => StmtKind::Fold { loc: self.loc()?, ghost: None },
                        "unfold" => StmtKind::Unfold { loc: self.loc()?, ghost: None },
                        "pad" => StmtKind::Pad { loc: self.loc()?, ghost: None },
                        "conc" => StmtKind::Conc { x: Var::new(self.ident()?.0), ghost: None },
                        _ => return Err(Diagnostic::new(sp, format!("unknown annotation `{kw}`"))),
                    };
                    self.expect_sym(")")?;
                    self.eat_sym(";");
                    out.push(Stmt { kind, span: self.span_from(s0) });
                }
                Ok(out)
            }
            Tok::Sym("{") => self.block(),
            Tok::Ident(k) if k == "var" => {
                self.bump();
                let (x, _) = self.ident()?;
                self.expect_sym("=")?;
                let e = self.sexpr()?;
                self.semi()?;
                let sp = self.span_from(start);
                self.bind(Var::new(x), e, &mut out, sp);
                Ok(out)
            }
            Tok::Ident(k) if k == "if" => {
                self.bump();
                self.expect_sym("(")?;
                let c = self.sexpr()?;
                self.expect_sym(")")?;
                let head = self.span_from(start);
                let cond = self.pure(c, &mut out, head);
                let then = self.stmt_or_block()?;
                let els = if self.eat_kw("else") { self.stmt_or_block()? } else { vec![] };
                out.push(Stmt { kind: StmtKind::If { cond, then, els }, span: self.span_from(start) });
                Ok(out)
            }
            Tok::Ident(k) if k == "return" => {
                self.bump();
                if self.is_sym(";") || self.is_sym("}") {
                    self.eat_sym(";");
                    out.push(Stmt { kind: StmtKind::Return(None), span: self.span_from(start) });
                    return Ok(out);
                }
                let e = self.sexpr()?;
                self.semi()?;
                let sp = self.span_from(start);
                let e = self.pure(e, &mut out, sp);
                out.push(Stmt { kind: StmtKind::Return(Some(e)), span: sp });
                Ok(out)
            }
            Tok::Ident(_) => {
                let lhs = self.sexpr()?;
                if self.eat_sym("=") {
                    let rhs = self.sexpr()?;
                    self.semi()?;
                    let sp = self.span_from(start);
                    match lhs {
                        SExpr::Proj(base, f) => {
                            let x = self.var_of(*base, &mut out, sp);
                            let e = self.pure(rhs, &mut out, sp);
                            out.push(Stmt { kind: StmtKind::Write { x, f, e, ghost: None }, span: sp });
                            Ok(out)
                        }
                        SExpr::Var(v) => Err(Diagnostic::new(
                            start,
                            format!("`{v}` is assigned twice; programs must be in single static assignment form"),
                        )),
                        _ => Err(Diagnostic::new(start, "invalid assignment target")),
                    }
                } else {
                    self.semi()?;
                    let sp = self.span_from(start);
                    match lhs {
                        SExpr::Call(f, args) => {
                            let args = args.into_iter().map(|a| self.pure(a, &mut out, sp)).collect();
                            out.push(Stmt { kind: StmtKind::Call { x: None, f, args }, span: sp });
                            Ok(out)
                        }
                        _ => Err(Diagnostic::new(start, "expression statement must be a call")),
                    }
                }
            }
            t => Err(self.err(format!("expected a statement, found {}", describe(&t)))),
        }
    }

    fn temp(&mut self) -> Var {
        let ctx = self.fnctx.as_mut().expect("temporaries only inside functions");
        loop {
            ctx.next += 1;
            let n = format!("_t{}", ctx.next);
            if !ctx.avoid.contains(&n) {
                let v = Var::new(n);
                ctx.synthetic.insert(v.clone());
                return v;
            }
        }
    }

    /// Emit statements defining `x` as `e`.
    fn bind(&mut self, x: Var, e: SExpr, out: &mut Vec<Stmt>, sp: Span) {
        let kind = match e {
            SExpr::Call(f, args) => {
                let args = args.into_iter().map(|a| self.pure(a, out, sp)).collect();
                StmtKind::Call { x: Some(x), f, args }
            }
            SExpr::Record(fs) => {
                let fields = fs.into_iter().map(|(f, e)| (f, self.pure(e, out, sp))).collect();
                StmtKind::Alloc { x, fields, ghost: None }
            }
            SExpr::Proj(b, f) => {
                let bx = self.var_of(*b, out, sp);
                StmtKind::Read { y: x, x: bx, f }
            }
            e => StmtKind::Assign { x, e: self.pure(e, out, sp) },
        };
        out.push(Stmt { kind, span: sp });
    }

    fn var_of(&mut self, e: SExpr, out: &mut Vec<Stmt>, sp: Span) -> Var {
        match e {
            SExpr::Var(v) => v,
            e => {
                let t = self.temp();
                self.bind(t.clone(), e, out, sp);
                t
            }
        }
    }

    /// Make an operand pure, hoisting calls, allocations and reads.
    fn pure(&mut self, e: SExpr, out: &mut Vec<Stmt>, sp: Span) -> Expr {
        match e {
            SExpr::Int(n) => Expr::Int(n),
            SExpr::Bool(b) => Expr::Bool(b),
            SExpr::Null => Expr::Null,
            SExpr::Var(v) => Expr::Var(v),
            SExpr::Neg(a) => match *a {
                SExpr::Int(n) => Expr::Int(-n),
                a => {
                    let a = self.pure(a, out, sp);
                    Expr::Bin(BinOp::Sub, Box::new(Expr::Int(0)), Box::new(a))
                }
            },
            SExpr::Not(a) => Expr::Not(Box::new(self.pure(*a, out, sp))),
            SExpr::Bin(op, a, b) => {
                let a = self.pure(*a, out, sp);
                let b = self.pure(*b, out, sp);
                Expr::Bin(op, Box::new(a), Box::new(b))
            }
            e @ (SExpr::Proj(..) | SExpr::Call(..) | SExpr::Record(..)) => {
                let t = self.temp();
                self.bind(t.clone(), e, out, sp);
                Expr::Var(t)
            }
        }
    }

    fn sexpr(&mut self) -> PResult<SExpr> {
        self.sexpr_bin(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let op = match self.peek() {
            Tok::Sym("||") => BinOp::Or,
            Tok::Sym("&&") => BinOp::And,
            Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym("+") => BinOp::Add,
            Tok::Sym("-") => BinOp::Sub,
            Tok::Sym("*") => BinOp::Mul,
            _ => return None,
        };
        Some(op)
    }

    fn sexpr_bin(&mut self, min: u8) -> PResult<SExpr> {
        let mut lhs = self.sexpr_unary()?;
        while let Some(op) = self.binop() {
            if op.prec() < min {
                break;
            }
            self.bump();
            let rhs = self.sexpr_bin(op.prec() + 1)?;
            lhs = SExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn sexpr_unary(&mut self) -> PResult<SExpr> {
        if self.eat_sym("!") {
            return Ok(SExpr::Not(Box::new(self.sexpr_unary()?)));
        }
        if self.eat_sym("-") {
            return Ok(SExpr::Neg(Box::new(self.sexpr_unary()?)));
        }
        let mut e = self.sexpr_primary()?;
        while self.is_sym(".") {
            self.bump();
            let (f, _) = self.ident()?;
            e = SExpr::Proj(Box::new(e), f);
        }
        Ok(e)
    }

    fn sexpr_primary(&mut self) -> PResult<SExpr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(SExpr::Int(n))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.sexpr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("{") => {
                self.bump();
                let mut fs: Vec<(String, SExpr)> = Vec::new();
                if !self.is_sym("}") {
                    loop {
                        let (f, sp) = self.ident()?;
                        if fs.iter().any(|(g, _)| *g == f) {
                            return Err(Diagnostic::new(sp, format!("duplicate field `{f}`")));
                        }
                        self.expect_sym(":")?;
                        fs.push((f, self.sexpr()?));
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym("}")?;
                Ok(SExpr::Record(fs))
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "true" => return Ok(SExpr::Bool(true)),
                    "false" => return Ok(SExpr::Bool(false)),
                    "null" => return Ok(SExpr::Null),
                    _ => {}
                }
                if self.eat_sym("(") {
                    let mut args = Vec::new();
                    if !self.is_sym(")") {
                        loop {
                            args.push(self.sexpr()?);
                            if !self.eat_sym(",") {
                                break;
                            }
                        }
                    }
                    self.expect_sym(")")?;
                    return Ok(SExpr::Call(name, args));
                }
                Ok(SExpr::Var(Var::new(name)))
            }
            t => Err(self.err(format!("expected an expression, found {}", describe(&t)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::AnnotStart => "`//:`".into(),
        Tok::AnnotEnd => "end of annotation".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// In signatures, `m(x)` with `x` a pointer parameter stands for the
/// measure of the snapshot stored at `x`'s location.
fn resolve_pointer_measures(s: &Schema) -> Schema {
    let mut map: BTreeMap<Var, Var> = BTreeMap::new();
    for (x, t) in &s.params {
        if let Some(l) = t.base.loc() {
            if let Some(b) = s.heap_in.get(l) {
                map.insert(x.clone(), b.binder.clone());
            }
        }
    }
    if map.is_empty() {
        return s.clone();
    }
    fn fix(t: &Term, map: &BTreeMap<Var, Var>) -> Term {
        match t {
            Term::Meas(m, a) => match &**a {
                Term::Var(x) if map.contains_key(x) => Term::Meas(m.clone(), Box::new(Term::Var(map[x].clone()))),
                a => Term::Meas(m.clone(), Box::new(fix(a, map))),
            },
            Term::Bin(o, a, b) => Term::Bin(*o, Box::new(fix(a, map)), Box::new(fix(b, map))),
            Term::Field(a, f) => Term::Field(Box::new(fix(a, map)), f.clone()),
            Term::Ite(c, a, b) => {
                Term::Ite(Box::new(c.map_terms(&|t| fix(t, map))), Box::new(fix(a, map)), Box::new(fix(b, map)))
            }
            t => t.clone(),
        }
    }
    s.map_preds(&mut |p| p.map_terms(&|t| fix(t, &map)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_listing() {
        let src = "(x:int) => int\nfunction abs(x){ if (0 <= x) return x; var r = 0 - x; return r; }";
        let p = parse_program(src).unwrap();
        assert_eq!(p.functions.len(), 1);
        let body = &p.functions[0].body;
        match &body[0].kind {
            StmtKind::If { then, els, .. } => {
                assert!(matches!(then[0].kind, StmtKind::Return(Some(_))));
                assert!(els.is_empty());
            }
            k => panic!("{k:?}"),
        }
        assert!(matches!(body.last().unwrap().kind, StmtKind::Return(Some(_))));
    }

    #[test]
    fn empty_program() {
        assert_eq!(parse_program("").unwrap(), Program::default());
        assert!(parse_qualifiers("").unwrap().is_empty());
    }

    #[test]
    fn list_typedef() {
        let p = parse_program("type list[A] = exists! l => t:list[A] . h:{data:A, next:?ref(l)}").unwrap();
        let d = &p.typedefs[0];
        assert_eq!(d.locs, vec![Loc::new("l")]);
        assert_eq!(d.heap.0.len(), 1);
        assert_eq!(d.root, Var::new("h"));
    }

    #[test]
    fn qualifier_with_wildcard() {
        let q = parse_qualifiers("qualif Pos(v:int): 0 <= v\nqualif LenSucc(v:L): len(v) = 1 + len(~A:L)").unwrap();
        assert!(q[0].wildcards.is_empty());
        assert_eq!(q[1].wildcards, vec![("A".to_string(), SortPat::Any("L".into()))]);
        assert_eq!(q[1].nu_sort, SortPat::Any("L".into()));
    }

    #[test]
    fn nested_operands_are_hoisted() {
        let src = "(x:ref(x)) / x |-> {data:int} => void\nfunction f(x){ x.data = g(x.data); return; }";
        let p = parse_program(src).unwrap();
        let f = &p.functions[0];
        assert_eq!(f.synthetic.len(), 2);
        assert!(matches!(f.body[0].kind, StmtKind::Read { .. }));
        assert!(matches!(f.body[1].kind, StmtKind::Call { .. }));
        assert!(matches!(f.body[2].kind, StmtKind::Write { .. }));
    }

    #[test]
    fn reassignment_is_rejected() {
        let e = parse_program("() => void\nfunction f(){ var x = 1; x = 2; }").unwrap_err();
        assert!(e[0].msg.contains("single static assignment"));
    }

    #[test]
    fn missing_signature() {
        let e = parse_program("function f(){ return; }").unwrap_err();
        assert!(e[0].msg.contains("no signature"));
    }

    #[test]
    fn duplicate_function() {
        let src = "() => void\nfunction f(){ return; }\n() => void\nfunction f(){ return; }";
        assert!(parse_program(src).unwrap_err()[0].msg.contains("duplicate"));
    }

    #[test]
    fn pointer_measure_sugar() {
        let src = "type list[A] = exists! l => t:list[A] . h:{data:A, next:?ref(l)}\n\
                   forall A. (x:?ref(x)) / x |-> x0:list[A] => ?ref(l) / l |-> r:{v:list[A] | len(v) = len(x)}\n\
                   function f(x){ return x; }";
        let p = parse_program(src).unwrap();
        let s = &p.functions[0].schema;
        assert_eq!(s.heap_out.0[0].ty.pred.to_string(), "len(v) = len(x0)");
        assert_eq!(s.out_locs, vec![Loc::new("l")]);
    }

    #[test]
    fn both_measure_forms_agree() {
        let a = parse_program("measure len : list => int { len(null) = 0; len(x) = 1 + len(x.next); }").unwrap();
        let b = parse_program("measure len(x : list) : int = if x = null then 0 else 1 + len(x.next);").unwrap();
        assert_eq!(a.measures, b.measures);
    }
}
