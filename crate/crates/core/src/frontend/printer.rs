use std::collections::{BTreeMap, BTreeSet};

use crate::model::*;

pub fn print_program(p: &Program) -> String {
    let mut items = Vec::new();
    for d in &p.typedefs {
        items.push(print_typedef(d));
    }
    for m in &p.measures {
        items.push(print_measure(m));
    }
    for f in &p.functions {
        items.push(print_function(f));
    }
    let mut s = items.join("\n");
    if !s.is_empty() && !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

pub fn print_typedef(d: &TypeDef) -> String {
    let mut s = format!("type {}", d.name);
    if !d.params.is_empty() {
        s.push_str(&format!("[{}]", d.params.join(", ")));
    }
    s.push_str(" = ");
    if !d.locs.is_empty() || !d.heap.is_empty() {
        let locs: Vec<String> = d.locs.iter().map(|l| l.to_string()).collect();
        s.push_str(&format!("exists! {} => ", locs.join(", ")));
        let short = d.heap.0.len() <= d.locs.len() && d.heap.0.iter().zip(&d.locs).all(|(b, l)| &b.loc == l);
        if short {
            let hs: Vec<String> = d.heap.0.iter().map(|b| format!("{}:{}", b.binder, print_rtype(&b.ty))).collect();
            s.push_str(&hs.join(" * "));
        } else {
            s.push_str(&print_heap(&d.heap));
        }
        s.push_str(" . ");
    }
    s.push_str(&format!("{}:{}\n", d.root, print_rtype(&d.root_ty)));
    s
}

pub fn print_measure(m: &Measure) -> String {
    let sort = match m.sort {
        MeasSort::Int => "int",
        MeasSort::Bool => "bool",
    };
    format!(
        "measure {} : {} => {} {{ {}(null) = {}; {}({}) = {}; }}\n",
        m.name,
        m.ctor,
        sort,
        m.name,
        surface_term(&m.null_case),
        m.name,
        m.param,
        surface_term(&m.rec_case)
    )
}

/// A measure body in source syntax: projections as `x.f`.
fn surface_term(t: &Term) -> String {
    let sub = |e: &Term| match e {
        Term::Bin(..) => format!("({})", surface_term(e)),
        _ => surface_term(e),
    };
    match t {
        Term::Field(e, f) if matches!(**e, Term::Var(_)) => format!("{e}.{f}"),
        Term::Meas(m, e) => format!("{m}({})", surface_term(e)),
        Term::Bin(o, a, b) => format!("{} {o} {}", sub(a), sub(b)),
        _ => t.to_string(),
    }
}

fn nu_name(p: &Pred) -> String {
    let vs = p.vars();
    let mut n = "v".to_string();
    let mut i = 1;
    while vs.contains(&Var::new(n.clone())) {
        n = format!("v{i}");
        i += 1;
    }
    n
}

fn show_pred_named(p: &Pred, nu: &str) -> String {
    if nu == "v" {
        p.to_string()
    } else {
        p.subst(&Subst::nu(Term::var(nu))).to_string()
    }
}

pub fn print_rtype(t: &RType) -> String {
    let b = print_base(&t.base);
    if t.pred.is_true() {
        b
    } else {
        let n = nu_name(&t.pred);
        format!("{{{}:{} | {}}}", n, b, show_pred_named(&t.pred, &n))
    }
}

fn print_base(b: &Base) -> String {
    match b {
        Base::Int => "int".into(),
        Base::Bool => "bool".into(),
        Base::TyVar(a) => a.clone(),
        Base::Null => "null".into(),
        Base::Ref(l) => format!("ref({l})"),
        Base::MaybeRef(l) => format!("?ref({l})"),
        Base::Record(fs) => {
            let v: Vec<String> = fs.iter().map(|(f, t)| format!("{f}:{}", print_rtype(t))).collect();
            format!("{{{}}}", v.join(", "))
        }
        Base::App(c, ts) if ts.is_empty() => c.clone(),
        Base::App(c, ts) => {
            let v: Vec<String> = ts.iter().map(print_rtype).collect();
            format!("{c}[{}]", v.join(", "))
        }
        Base::Product(a, b) => format!("({} * {})", print_base(a), print_base(b)),
        Base::OrNull(a) => format!("({} + null)", print_base(a)),
    }
}

pub fn print_heap(h: &Heap) -> String {
    if h.is_empty() {
        return "emp".into();
    }
    let v: Vec<String> = h.0.iter().map(|b| format!("{} |-> {}:{}", b.loc, b.binder, print_rtype(&b.ty))).collect();
    v.join(" * ")
}

pub fn print_schema(s: &Schema) -> String {
    let mut out = String::new();
    if !s.tvars.is_empty() {
        out.push_str(&format!("forall {}. ", s.tvars.join(", ")));
    }
    let ps: Vec<String> = s.params.iter().map(|(x, t)| format!("{x}:{}", print_rtype(t))).collect();
    out.push_str(&format!("({})", ps.join(", ")));
    if !s.heap_in.is_empty() {
        out.push_str(&format!(" / {}", print_heap(&s.heap_in)));
    }
    out.push_str(" => ");
    if !s.out_locs.is_empty() {
        let ls: Vec<String> = s.out_locs.iter().map(|l| l.to_string()).collect();
        out.push_str(&format!("exists {}. ", ls.join(", ")));
    }
    match &s.out {
        None => out.push_str("void"),
        Some((x, t)) => out.push_str(&format!("{x}:{}", print_rtype(t))),
    }
    if !s.heap_out.is_empty() {
        out.push_str(&format!(" / {}", print_heap(&s.heap_out)));
    }
    out
}

pub fn print_function(f: &Function) -> String {
    let mut uses: BTreeMap<Var, usize> = BTreeMap::new();
    walk_stmts(&f.body, &mut |s| count_uses(&s.kind, &mut uses));
    let inline: BTreeSet<Var> =
        f.synthetic.iter().filter(|v| uses.get(*v).copied().unwrap_or(0) == 1).cloned().collect();
    let mut out = format!("{}\nfunction {}(", print_schema(&f.schema), f.name);
    let ps: Vec<String> = f.params.iter().map(|p| p.to_string()).collect();
    out.push_str(&ps.join(", "));
    out.push_str(") {\n");
    let mut pr = Printer { inline, out: &mut out };
    pr.block(&f.body, 1);
    out.push_str("}\n");
    out
}

fn count_expr(e: &Expr, m: &mut BTreeMap<Var, usize>) {
    match e {
        Expr::Var(v) => *m.entry(v.clone()).or_default() += 1,
        Expr::Bin(_, a, b) => {
            count_expr(a, m);
            count_expr(b, m);
        }
        Expr::Not(a) | Expr::Proj(a, _) => count_expr(a, m),
        _ => {}
    }
}

/// Uses at this statement only (not nested blocks).
fn count_uses(k: &StmtKind, m: &mut BTreeMap<Var, usize>) {
    match k {
        StmtKind::Assign { e, .. } => count_expr(e, m),
        StmtKind::Read { x, .. } => *m.entry(x.clone()).or_default() += 1,
        StmtKind::Write { x, e, .. } => {
            *m.entry(x.clone()).or_default() += 1;
            count_expr(e, m)
        }
        StmtKind::Alloc { fields, .. } => fields.iter().for_each(|(_, e)| count_expr(e, m)),
        StmtKind::Call { args, .. } => args.iter().for_each(|e| count_expr(e, m)),
        StmtKind::If { cond, .. } => count_expr(cond, m),
        StmtKind::Return(Some(e)) => count_expr(e, m),
        StmtKind::Conc { x, .. } => *m.entry(x.clone()).or_default() += 1,
        _ => {}
    }
}

struct Printer<'a> {
    inline: BTreeSet<Var>,
    out: &'a mut String,
}

impl Printer<'_> {
    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn block(&mut self, b: &[Stmt], depth: usize) {
        // rendered right-hand sides of temporaries waiting for their use
        let mut pending: Vec<(Var, String, String)> = Vec::new();
        for s in b {
            if s.kind.is_annotation() {
                for (_, _, full) in pending.drain(..) {
                    self.line(depth, &full);
                }
                self.line(depth, &format!("//: {};", annotation(&s.kind)));
                continue;
            }
            let env: BTreeMap<Var, String> = pending.iter().map(|(v, r, _)| (v.clone(), r.clone())).collect();
            let mut used = BTreeMap::new();
            count_uses(&s.kind, &mut used);
            pending.retain(|(v, _, _)| !used.contains_key(v));
            if let Some(x) = s.kind.defines() {
                if self.inline.contains(x) {
                    let rhs = self.rhs(&s.kind, &env);
                    pending.push((x.clone(), rhs.clone(), format!("var {x} = {rhs};")));
                    continue;
                }
            }
            match &s.kind {
                StmtKind::If { cond, then, els } => {
                    self.line(depth, &format!("if ({}) {{", expr(cond, &env, 0)));
                    self.block(then, depth + 1);
                    if els.is_empty() {
                        self.line(depth, "}");
                    } else {
                        self.line(depth, "} else {");
                        self.block(els, depth + 1);
                        self.line(depth, "}");
                    }
                }
                StmtKind::Return(None) => self.line(depth, "return;"),
                StmtKind::Return(Some(e)) => self.line(depth, &format!("return {};", expr(e, &env, 0))),
                StmtKind::Write { x, f, e, .. } => {
                    let recv = env.get(x).cloned().unwrap_or_else(|| x.to_string());
                    self.line(depth, &format!("{recv}.{f} = {};", expr(e, &env, 0)))
                }
                StmtKind::Call { x: None, .. } => {
                    let r = self.rhs(&s.kind, &env);
                    self.line(depth, &format!("{r};"))
                }
                k => {
                    let x = k.defines().expect("definition");
                    let r = self.rhs(k, &env);
                    self.line(depth, &format!("var {x} = {r};"))
                }
            }
        }
        for (_, _, full) in pending.drain(..) {
            self.line(depth, &full);
        }
    }

    fn rhs(&self, k: &StmtKind, env: &BTreeMap<Var, String>) -> String {
        match k {
            StmtKind::Assign { e, .. } => expr(e, env, 0),
            StmtKind::Read { x, f, .. } => {
                let recv = env.get(x).cloned().unwrap_or_else(|| x.to_string());
                format!("{recv}.{f}")
            }
            StmtKind::Alloc { fields, .. } => {
                let fs: Vec<String> = fields.iter().map(|(f, e)| format!("{f}: {}", expr(e, env, 0))).collect();
                format!("{{{}}}", fs.join(", "))
            }
            StmtKind::Call { f, args, .. } => {
                let a: Vec<String> = args.iter().map(|e| expr(e, env, 0)).collect();
                format!("{f}({})", a.join(", "))
            }
            _ => unreachable!("not a definition"),
        }
    }
}

fn annotation(k: &StmtKind) -> String {
    match k {
        StmtKind::Fold { loc, .. } => format!("fold(&{loc})"),
        StmtKind::Unfold { loc, .. } => format!("unfold(&{loc})"),
        StmtKind::Pad { loc, .. } => format!("pad(&{loc})"),
        StmtKind::Conc { x, .. } => format!("conc({x})"),
        _ => unreachable!(),
    }
}

/// Print an expression; `min` is the binding strength required by the
/// context.
fn expr(e: &Expr, env: &BTreeMap<Var, String>, min: u8) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Null => "null".into(),
        Expr::Loc(l) => format!("&{l}"),
        Expr::Var(v) => env.get(v).cloned().unwrap_or_else(|| v.to_string()),
        Expr::Not(a) => format!("!{}", expr(a, env, 10)),
        Expr::Proj(a, f) => format!("{}.{f}", expr(a, env, 10)),
        Expr::Bin(op, a, b) => {
            let p = op.prec();
            let s = format!("{} {} {}", expr(a, env, p), op.symbol(), expr(b, env, p + 1));
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn round(src: &str) -> String {
        print_program(&parse_program(src).unwrap())
    }

    #[test]
    fn empty_program_prints_nothing() {
        assert_eq!(print_program(&Program::default()), "");
    }

    #[test]
    fn temporaries_are_folded_back() {
        let src = "type list[A] = exists! l => t:list[A] . h:{data:A, next:?ref(l)}\n\
                   forall A. (k:A, x:?ref(x)) / x |-> x0:list[A] => void / x |-> x1:list[A]\n\
                   function f(k, x){ if (k <= x.data) { return; } return; }";
        let s = round(src);
        assert!(s.contains("if (k <= x.data) {"), "{s}");
        assert_eq!(round(&s), s);
    }

    #[test]
    fn annotation_lines() {
        let src = "type list[A] = exists! l => t:list[A] . h:{data:A, next:?ref(l)}\n\
                   forall A. (x:ref(x)) / x |-> list[A] => void / x |-> list[A]\n\
                   function f(x){ //: unfold(&x);\n var d = x.data;\n //: fold(&x);\n return; }";
        let s = round(src);
        assert!(s.contains("  //: fold(&x);\n"), "{s}");
        assert_eq!(parse_program(&s).unwrap().functions[0].body.len(), 4);
    }

    #[test]
    fn precedence_survives() {
        let src = "(a:int, b:int) => int\nfunction f(a, b){ var c = (a - b) - (a - b); var d = a * (b + 1); return c; }";
        let s = round(src);
        assert!(s.contains("var c = a - b - (a - b);"), "{s}");
        assert!(s.contains("var d = a * (b + 1);"), "{s}");
        assert_eq!(round(&s), s);
    }

    #[test]
    fn schema_printing() {
        let src = "(x:int) => {v:int | 0 <= v}\nfunction f(x){ return x; }";
        assert!(round(src).starts_with("(x:int) => r:{v:int | 0 <= v}\n"));
    }
}
