//! Validity checking of implications over equality, linear arithmetic and
//! uninterpreted functions.

pub mod encode;
pub mod finite;
pub mod process;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{MeasSort, Pred, Program, Term};

pub use encode::{encode_pred, Encoder};
pub use finite::FiniteBackend;
pub use process::{SmtConfig, SmtSession, SolverCache};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Validity {
    Valid,
    Invalid,
    Unknown,
}

impl Validity {
    pub fn is_valid(self) -> bool {
        self == Validity::Valid
    }
}

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("cannot start solver `{0}`: {1}")]
    Spawn(String, String),
    #[error("solver i/o: {0}")]
    Io(String),
    #[error("solver protocol: {0}")]
    Protocol(String),
    #[error("cannot encode: {0}")]
    Encode(String),
}

/// Decides `hyps ⊢ goal`, i.e. unsatisfiability of `hyps ∧ ¬goal`.
pub trait Backend: Send {
    fn check(&mut self, hyps: &[Pred], goal: &Pred) -> Result<Validity, SmtError>;

    /// Number of queries actually sent to a solver (cache misses).
    fn queries(&self) -> usize {
        0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureDecl {
    pub name: String,
    pub sort: MeasSort,
    pub null_case: Term,
}

/// Program-wide declarations shared by every query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Theory {
    pub fields: BTreeSet<String>,
    pub measures: Vec<MeasureDecl>,
}

impl Theory {
    pub fn from_program(p: &Program) -> Theory {
        let mut fields = BTreeSet::new();
        for d in &p.typedefs {
            d.root_ty.base.each_field(&mut |f| {
                fields.insert(f.to_string());
            });
            for b in &d.heap.0 {
                b.ty.base.each_field(&mut |f| {
                    fields.insert(f.to_string());
                });
            }
        }
        for f in &p.functions {
            crate::model::walk_stmts(&f.body, &mut |s| match &s.kind {
                crate::model::StmtKind::Alloc { fields: fs, .. } => {
                    fields.extend(fs.iter().map(|(n, _)| n.clone()));
                }
                crate::model::StmtKind::Read { f, .. } | crate::model::StmtKind::Write { f, .. } => {
                    fields.insert(f.clone());
                }
                _ => {}
            });
        }
        let measures = p
            .measures
            .iter()
            .map(|m| MeasureDecl { name: m.name.clone(), sort: m.sort, null_case: m.null_case.clone() })
            .collect();
        Theory { fields, measures }
    }

    pub fn measure_sort(&self, m: &str) -> Option<MeasSort> {
        self.measures.iter().find(|d| d.name == m).map(|d| d.sort)
    }
}
