use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

/// Internal spelling of the value variable. It cannot be produced by the
/// lexer, so it never collides with a program identifier.
pub const NU: &str = "ν";

/// Program variables and heap binders share one namespace.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct Var(pub String);

pub type Binder = Var;

impl Var {
    pub fn new(s: impl Into<String>) -> Var {
        Var(s.into())
    }

    pub fn nu() -> Var {
        Var(NU.to_string())
    }

    pub fn is_nu(&self) -> bool {
        self.0 == NU
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_nu() {
            f.write_str("v")
        } else {
            f.write_str(&self.0)
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct Loc(pub String);

impl Loc {
    pub fn new(s: impl Into<String>) -> Loc {
        Loc(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct KVar(pub u32);

impl fmt::Display for KVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}", self.0)
    }
}

/// Fresh-name supply for identifiers and locations along one program path.
///
/// Names are chosen from the hint by counter suffix, so generation is
/// deterministic given the order of requests.
#[derive(Clone, Debug, Default)]
pub struct NameGen {
    vars: BTreeSet<String>,
    locs: BTreeSet<String>,
    /// Per prefix and starting counter, a lower bound on the first unused
    /// counter. Names are never released, so the bound only grows.
    var_next: BTreeMap<(String, u32), u32>,
    loc_next: BTreeMap<(String, u32), u32>,
}

impl NameGen {
    pub fn new() -> NameGen {
        NameGen::default()
    }

    pub fn reserve_var(&mut self, v: &Var) {
        self.vars.insert(v.0.clone());
    }

    pub fn reserve_loc(&mut self, l: &Loc) {
        self.locs.insert(l.0.clone());
    }

    pub fn has_var(&self, v: &Var) -> bool {
        self.vars.contains(&v.0)
    }

    pub fn has_loc(&self, l: &Loc) -> bool {
        self.locs.contains(&l.0)
    }

    /// `x`, then `x1`, `x2`, ...
    pub fn fresh_var(&mut self, hint: &str) -> Var {
        let name = pick(&self.vars, &mut self.var_next, hint, "", 1, true);
        self.vars.insert(name.clone());
        Var(name)
    }

    /// Heap binder for a location: `x0`, `x1`, ... (or `t1_0` when the
    /// location name already ends in a digit).
    pub fn fresh_binder(&mut self, loc: &Loc) -> Var {
        let base = loc.0.trim_start_matches('_');
        let base = if base.is_empty() { "b" } else { base };
        let sep = if base.ends_with(|c: char| c.is_ascii_digit()) { "_" } else { "" };
        let name = pick(&self.vars, &mut self.var_next, base, sep, 0, false);
        self.vars.insert(name.clone());
        Var(name)
    }

    pub fn fresh_loc(&mut self, hint: &str) -> Loc {
        let name = pick(&self.locs, &mut self.loc_next, hint, "", 1, true);
        self.locs.insert(name.clone());
        Loc(name)
    }

    /// Union of two supplies, used when two branches rejoin.
    pub fn merge(&mut self, other: &NameGen) {
        self.merge_vars(other);
        self.merge_locs(other);
    }

    pub fn merge_vars(&mut self, other: &NameGen) {
        self.vars.extend(other.vars.iter().cloned());
        merge_bounds(&mut self.var_next, &other.var_next);
    }

    pub fn merge_locs(&mut self, other: &NameGen) {
        self.locs.extend(other.locs.iter().cloned());
        merge_bounds(&mut self.loc_next, &other.loc_next);
    }
}

fn merge_bounds(into: &mut BTreeMap<(String, u32), u32>, from: &BTreeMap<(String, u32), u32>) {
    for (k, n) in from {
        let e = into.entry(k.clone()).or_insert(*n);
        *e = (*e).max(*n);
    }
}

fn pick(
    used: &BTreeSet<String>,
    next: &mut BTreeMap<(String, u32), u32>,
    hint: &str,
    sep: &str,
    start: u32,
    bare_ok: bool,
) -> String {
    if bare_ok && !used.contains(hint) {
        return hint.to_string();
    }
    let key = (format!("{hint}{sep}"), start);
    let mut i = next.get(&key).copied().unwrap_or(start);
    loop {
        let cand = format!("{}{i}", key.0);
        if !used.contains(&cand) {
            next.insert(key, i);
            return cand;
        }
        i += 1;
    }
}

/// Global κ counter. Ids start at 1.
#[derive(Clone, Debug)]
pub struct KappaGen {
    next: u32,
}

impl Default for KappaGen {
    fn default() -> Self {
        KappaGen { next: 1 }
    }
}

impl KappaGen {
    pub fn new() -> KappaGen {
        KappaGen::default()
    }

    pub fn fresh(&mut self) -> KVar {
        let k = KVar(self.next);
        self.next += 1;
        k
    }

    pub fn peek(&self) -> u32 {
        self.next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_suffix() {
        let mut g = NameGen::new();
        assert_eq!(g.fresh_var("x").0, "x");
        assert_eq!(g.fresh_var("x").0, "x1");
        assert_eq!(g.fresh_var("x").0, "x2");
    }

    #[test]
    fn binders_follow_location() {
        let mut g = NameGen::new();
        assert_eq!(g.fresh_binder(&Loc::new("x")).0, "x0");
        assert_eq!(g.fresh_binder(&Loc::new("x")).0, "x1");
        assert_eq!(g.fresh_binder(&Loc::new("t1")).0, "t1_0");
    }

    #[test]
    fn binder_counter_is_independent_of_var_counter() {
        let mut g = NameGen::new();
        g.fresh_var("x");
        g.fresh_var("x");
        assert_eq!(g.fresh_binder(&Loc::new("x")).0, "x0");
        assert_eq!(g.fresh_var("x").0, "x2");
    }

    #[test]
    fn kappas_count_up() {
        let mut k = KappaGen::new();
        for _ in 0..4 {
            k.fresh();
        }
        assert_eq!(k.fresh(), KVar(5));
    }
}
