//! Shared inputs for the pipeline benchmarks.

use std::path::PathBuf;

use art_core::driver::Config;
use art_core::frontend::parse_qualifiers;

pub fn corpus_source(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Driver configuration with the corpus qualifiers.
pub fn config() -> Config {
    let qualifiers = parse_qualifiers(&corpus_source("base.quals")).expect("corpus qualifiers parse");
    Config { qualifiers, ..Config::default() }
}
