mod common;

use proptest::prelude::*;

use art_core::audit::{eval_measure, Value};
use common::props::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn solver_matches_exhaustive_search(case in horn_case()) {
        check_solver_oracle(case)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn len_counts_nodes(input in snapshot_input()) {
        check_len_counts_nodes(&list_theory(), input)?;
    }

    #[test]
    fn type_predicate_holds_on_walked_cells(input in snapshot_input()) {
        check_predicate_matches_walk(&list_theory(), input)?;
    }

    #[test]
    fn disjoint_lists_separate(a in snapshot_input(), b in snapshot_input()) {
        check_separation(&list_theory(), a, b)?;
    }

    #[test]
    fn renaming_and_substitution(p in small_pred()) {
        check_subst(p)?;
    }

    #[test]
    fn wf_type_depends_only_on_bound_names(p in small_pred(), gamma in prop::collection::vec(any::<bool>(), 3)) {
        check_wf_monotone(p, gamma)?;
    }

    #[test]
    fn fold_order_matches_permutation_search(g in dag()) {
        check_fold_order(g)?;
    }

    #[test]
    fn variable_symbols_are_injective(a in identifier(), b in identifier()) {
        check_symbols_injective(a, b)?;
    }

    #[test]
    fn predicates_print_and_reparse(p in small_pred()) {
        check_pred_round_trip(p)?;
    }

    #[test]
    fn generated_programs_round_trip(fs in gprogram()) {
        check_program_round_trip(fs)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn fresh_names_never_repeat(hints in prop::collection::vec(any::<u8>(), 1..64)) {
        check_fresh_names(hints, 100_000)?;
    }
}

#[test]
fn len_of_two_cells_is_two() {
    let t = list_theory();
    let len = t.measures.iter().find(|m| m.name == "len").unwrap();
    assert_eq!(eval_measure(len, &two_cells(), &t.measures).unwrap(), Value::Int(2));
}
