//! κ templates for function schemas and field naming for records.

use std::collections::BTreeMap;

use crate::model::*;

/// Put a fresh κ at every unrefined output position of `s`: the result
/// type and the output heap. Scalars and type applications are templated,
/// inner positions first; pointers, type variables and records themselves
/// are not (records get κs on their fields). Input positions are kept as
/// written, since a top-level function has no callers to constrain them.
pub fn mk_templates(
    s: &Schema,
    fname: &str,
    kappas: &mut KappaGen,
    scopes: &mut BTreeMap<KVar, KScope>,
) -> Schema {
    let mut scope: Vec<(Var, Sort)> = s.params.iter().map(|(x, t)| (x.clone(), Sort::of_base(&t.base))).collect();
    for b in &s.heap_in.0 {
        scope.push((b.binder.clone(), Sort::of_base(&b.ty.base)));
    }
    let mut out = s.clone();
    if let Some((x, t)) = &s.out {
        let t = fill(t, &scope, kappas, scopes, &format!("{fname} result"));
        scope.push((x.clone(), Sort::of_base(&t.base)));
        out.out = Some((x.clone(), t));
    }
    out.heap_out = Heap(
        s.heap_out
            .0
            .iter()
            .map(|b| HeapBind {
                loc: b.loc.clone(),
                binder: b.binder.clone(),
                ty: fill(&b.ty, &scope, kappas, scopes, &format!("{fname} output heap at {}", b.loc)),
            })
            .collect(),
    );
    out
}

fn fill(
    t: &RType,
    scope: &[(Var, Sort)],
    kappas: &mut KappaGen,
    scopes: &mut BTreeMap<KVar, KScope>,
    origin: &str,
) -> RType {
    let base = match &t.base {
        Base::Record(fs) => {
            Base::Record(fs.iter().map(|(f, ft)| (f.clone(), fill(ft, scope, kappas, scopes, origin))).collect())
        }
        Base::App(c, ts) => Base::App(c.clone(), ts.iter().map(|a| fill(a, scope, kappas, scopes, origin)).collect()),
        b => b.clone(),
    };
    let wants = matches!(base, Base::Int | Base::Bool | Base::App(..));
    let pred = if wants && t.pred.is_true() {
        let k = kappas.fresh();
        scopes.insert(k, KScope { k, nu: Sort::of_base(&base), vars: scope.to_vec(), origin: origin.to_string() });
        Pred::kapp(k)
    } else {
        t.pred.clone()
    };
    RType { base, pred }
}

/// Conjoin `ν = Field(z, f)` to every field refinement of a record type.
/// Idempotent. `None` for non-record types.
pub fn name_fields(z: &Term, t: &RType) -> Option<RType> {
    let Base::Record(fs) = &t.base else { return None };
    let fs = fs
        .iter()
        .map(|(f, ft)| {
            let link = Pred::eq(Term::nu(), Term::field(z.clone(), f));
            let pred = if ft.pred.conjuncts().contains(&link) { ft.pred.clone() } else { Pred::and([ft.pred.clone(), link]) };
            (f.clone(), RType { base: ft.base.clone(), pred })
        })
        .collect();
    Some(RType { base: Base::Record(fs), pred: t.pred.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn templ(src: &str) -> Vec<String> {
        let p = parse_program(src).unwrap();
        let mut kg = KappaGen::new();
        let mut sc = BTreeMap::new();
        p.functions
            .iter()
            .map(|f| crate::frontend::print_schema(&mk_templates(&f.schema, &f.name, &mut kg, &mut sc)))
            .collect()
    }

    #[test]
    fn abs_output_gets_first_kappa() {
        let s = templ("(x:int) => int\nfunction abs(x){ return x; }");
        assert!(s[0].ends_with("{v:int | k1}"), "{}", s[0]);
    }

    #[test]
    fn elements_before_structure() {
        let s = templ(
            "type list[A] = exists! l => t:list[A] . h:{data:A, next:?ref(l)}\n\
             (x:ref(x)) / x |-> list[int] => void / x |-> list[int]\nfunction f(x){ return; }",
        );
        assert!(s[0].contains("{v:list[{v:int | k1}] | k2}"), "{}", s[0]);
    }

    #[test]
    fn written_refinements_are_kept() {
        let s = templ("(x:int) => {v:int | 0 <= v}\nfunction f(x){ return x; }");
        assert!(!s[0].contains("k1"));
    }

    #[test]
    fn naming_fields_is_idempotent() {
        let t = RType::plain(Base::Record(vec![
            ("data".into(), RType::new(Base::Int, Pred::rel(Rel::Le, Term::Int(0), Term::nu()))),
            ("next".into(), RType::plain(Base::MaybeRef(Loc::new("l")))),
        ]));
        let z = Term::var("z");
        let once = name_fields(&z, &t).unwrap();
        assert_eq!(once.base.field("data").unwrap().pred.to_string(), "0 <= v && v = Field(z, data)");
        assert_eq!(name_fields(&z, &once).unwrap(), once);
        assert!(name_fields(&z, &RType::int()).is_none());
    }
}
