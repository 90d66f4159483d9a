//! Alias refinement types for a small imperative language with linked
//! heap structures: parsing, annotation inference, constraint generation,
//! predicate-abstraction solving and an SMT-LIB2 backend.

pub mod annotate;
pub mod audit;
pub mod cgen;
pub mod driver;
pub mod frontend;
pub mod model;
pub mod smt;
pub mod solve;
pub mod wellformed;

pub use model::*;
