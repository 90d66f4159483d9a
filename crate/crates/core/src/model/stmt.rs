use std::collections::BTreeSet;

use serde::Serialize;

use super::names::{Loc, Var};
use super::types::{Measure, Schema, TypeDef};

/// Byte range plus the 1-based line/column of its start.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Le => "<=",
            BinOp::Lt => "<",
            BinOp::Ge => ">=",
            BinOp::Gt => ">",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn prec(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Le | BinOp::Lt | BinOp::Ge | BinOp::Gt => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }

    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    pub fn is_cmp(self) -> bool {
        self.prec() == 3
    }
}

/// Program expressions. After desugaring, statement operands are pure:
/// calls, allocations and field reads are hoisted into their own
/// statements. `Proj` is only used in logic positions.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Null,
    Loc(Loc),
    Var(Var),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Proj(Box<Expr>, String),
}

impl Expr {
    pub fn var(s: &str) -> Expr {
        Expr::Var(Var::new(s))
    }

    pub fn vars_into(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Bin(_, a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
            Expr::Not(a) | Expr::Proj(a, _) => a.vars_into(out),
            _ => {}
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

/// Statement forms. Ghost fields are filled in by elaboration and are
/// never printed.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StmtKind {
    Assign { x: Var, e: Expr },
    Read { y: Var, x: Var, f: String },
    Write { x: Var, f: String, e: Expr, ghost: Option<Var> },
    Alloc { x: Var, fields: Vec<(String, Expr)>, ghost: Option<(Loc, Var)> },
    Call { x: Option<Var>, f: String, args: Vec<Expr> },
    If { cond: Expr, then: Vec<Stmt>, els: Vec<Stmt> },
    Return(Option<Expr>),
    Unfold { loc: Loc, ghost: Option<Vec<(Loc, Var)>> },
    Fold { loc: Loc, ghost: Option<Var> },
    Conc { x: Var, ghost: Option<Var> },
    Pad { loc: Loc, ghost: Option<Var> },
}

impl StmtKind {
    pub fn is_annotation(&self) -> bool {
        matches!(self, StmtKind::Unfold { .. } | StmtKind::Fold { .. } | StmtKind::Conc { .. } | StmtKind::Pad { .. })
    }

    /// Variable defined by this statement, if any.
    pub fn defines(&self) -> Option<&Var> {
        match self {
            StmtKind::Assign { x, .. } | StmtKind::Alloc { x, .. } => Some(x),
            StmtKind::Read { y, .. } => Some(y),
            StmtKind::Call { x: Some(x), .. } => Some(x),
            _ => None,
        }
    }

    /// Same statement with ghost fields cleared.
    pub fn without_ghosts(&self) -> StmtKind {
        match self {
            StmtKind::Write { x, f, e, .. } => StmtKind::Write { x: x.clone(), f: f.clone(), e: e.clone(), ghost: None },
            StmtKind::Alloc { x, fields, .. } => StmtKind::Alloc { x: x.clone(), fields: fields.clone(), ghost: None },
            StmtKind::Unfold { loc, .. } => StmtKind::Unfold { loc: loc.clone(), ghost: None },
            StmtKind::Fold { loc, .. } => StmtKind::Fold { loc: loc.clone(), ghost: None },
            StmtKind::Conc { x, .. } => StmtKind::Conc { x: x.clone(), ghost: None },
            StmtKind::Pad { loc, .. } => StmtKind::Pad { loc: loc.clone(), ghost: None },
            StmtKind::If { cond, then, els } => StmtKind::If {
                cond: cond.clone(),
                then: strip_block(then),
                els: strip_block(els),
            },
            k => k.clone(),
        }
    }
}

pub fn strip_block(b: &[Stmt]) -> Vec<Stmt> {
    b.iter().map(|s| Stmt { kind: s.kind.without_ghosts(), span: s.span }).collect()
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Function {
    pub name: String,
    pub params: Vec<Var>,
    pub schema: Schema,
    pub body: Vec<Stmt>,
    /// Temporaries introduced by desugaring; the printer folds them back
    /// into the expression they came from when possible.
    pub synthetic: BTreeSet<Var>,
    pub span: Span,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Program {
    pub typedefs: Vec<TypeDef>,
    pub measures: Vec<Measure>,
    pub functions: Vec<Function>,
}

impl Program {
    pub fn typedef(&self, name: &str) -> Option<&TypeDef> {
        self.typedefs.iter().find(|d| d.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn measure(&self, name: &str) -> Option<&Measure> {
        self.measures.iter().find(|m| m.name == name)
    }

    /// Type definitions with their measures attached.
    pub fn resolved_typedefs(&self) -> Vec<TypeDef> {
        self.typedefs
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.measures = self.measures.iter().filter(|m| m.ctor == d.name).cloned().collect();
                d
            })
            .collect()
    }
}

/// Visit all statements in a block, depth first, in program order.
pub fn walk_stmts<'a>(b: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in b {
        f(s);
        if let StmtKind::If { then, els, .. } = &s.kind {
            walk_stmts(then, f);
            walk_stmts(els, f);
        }
    }
}

/// Drop every annotation statement.
pub fn erase_annotations(b: &[Stmt]) -> Vec<Stmt> {
    b.iter()
        .filter(|s| !s.kind.is_annotation())
        .map(|s| match &s.kind {
            StmtKind::If { cond, then, els } => Stmt {
                kind: StmtKind::If { cond: cond.clone(), then: erase_annotations(then), els: erase_annotations(els) },
                span: s.span,
            },
            k => Stmt { kind: k.without_ghosts(), span: s.span },
        })
        .collect()
}
