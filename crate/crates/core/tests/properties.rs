use proptest::prelude::*;
use sqlclarify_core::eval::{score_items, ScoredItem};
use sqlclarify_core::{canonicalize, AmbiguityCategory, Counts, Metrics, Span};

fn sql_fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("SELECT".to_string()),
        Just("select".to_string()),
        Just("FROM".to_string()),
        Just("where".to_string()),
        Just("Drivers".to_string()),
        Just("\"Rank\"".to_string()),
        Just("`year`".to_string()),
        Just("'Hamilton'".to_string()),
        Just("'it''s'".to_string()),
        Just("007.50".to_string()),
        Just("1E+03".to_string()),
        Just("+2".to_string()),
        Just("count(*)".to_string()),
        Just("<=".to_string()),
        Just("!=".to_string()),
        Just(",".to_string()),
        Just("-- note\n".to_string()),
        Just("/* c */".to_string()),
        "[a-z_][a-z0-9_]{0,6}",
        "[0-9]{1,4}",
    ]
}

fn item() -> impl Strategy<Value = ScoredItem> {
    (0usize..20, 1usize..6, 0usize..7).prop_map(|(s, l, c)| ScoredItem {
        span: Span::new(s, s + l),
        category: AmbiguityCategory::ALL[c],
        phrase: String::new(),
    })
}

proptest! {
    #[test]
    fn canonical_form_is_a_fixed_point(parts in proptest::collection::vec(sql_fragment(), 1..12)) {
        let sql = parts.join(" ");
        let once = canonicalize(&sql);
        prop_assume!(once.is_ok(), "comment-only input is rejected as empty");
        let once = once.unwrap();
        let twice = canonicalize(&once.render()).unwrap();
        prop_assert_eq!(&once.tokens, &twice.tokens);
        prop_assert_eq!(once.render(), twice.render());
    }

    #[test]
    fn scoring_conserves_counts(
        detected in proptest::collection::vec(item(), 0..6),
        annotated in proptest::collection::vec(item(), 0..6),
    ) {
        let total = score_items(&detected, &annotated).total();
        prop_assert_eq!(total.tp + total.fp, detected.len() as u64);
        prop_assert_eq!(total.tp + total.fn_, annotated.len() as u64);
    }

    #[test]
    fn scores_stay_in_unit_interval(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
        let s: Metrics = Counts::new(tp, fp, fn_).scores();
        for v in [s.precision, s.recall, s.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-12);
        prop_assert!(s.f1 + 1e-12 >= s.precision.min(s.recall));
        prop_assert_eq!(s.zero_division, tp == 0);
    }
}
