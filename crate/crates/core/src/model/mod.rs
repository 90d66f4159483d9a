//! Syntax and semantic objects shared by every pass.

pub mod horn;
pub mod names;
pub mod pred;
pub mod stmt;
pub mod types;

pub use horn::{projection, Clause, ConstraintSet, KScope, Prov};
pub use names::{Binder, KVar, KappaGen, Loc, NameGen, Var, NU};
pub use pred::{AOp, KSubst, Pred, Rel, Subst, Term};
pub use stmt::{erase_annotations, walk_stmts, BinOp, Expr, Function, Program, Span, Stmt, StmtKind};
pub use types::{
    Base, EnvItem, Heap, HeapBind, HeapError, MeasSort, Measure, Qualifier, RType, Schema, Sort, SortPat, TypeDef,
    TypeEnv,
};
