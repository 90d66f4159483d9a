//! Concrete syntax: lexing, parsing with desugaring into pure operands,
//! qualifier files, and printing.

pub mod lexer;
pub mod parser;
pub mod printer;

use std::fmt;

use crate::model::Span;

pub use parser::{parse_pred, parse_program, parse_qualifiers, parse_rtype};
pub use printer::{print_program, print_rtype, print_schema};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub msg: String,
}

impl Diagnostic {
    pub fn new(span: Span, msg: impl Into<String>) -> Diagnostic {
        Diagnostic { span, msg: msg.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.col, self.msg)
    }
}

impl std::error::Error for Diagnostic {}
