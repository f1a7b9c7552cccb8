use std::collections::HashSet;

use deplab::metrics::{evaluate, mattr, mean, relative_error_rate, sample_sd, zscore, Prediction, PunctPolicy};
use deplab::treebank::{DepSentence, DepToken};
use proptest::prelude::*;

fn windows_by_enumeration(tokens: &[String], window: usize) -> f64 {
    let w = window.min(tokens.len());
    let ratios: Vec<f64> = tokens
        .windows(w)
        .map(|win| win.iter().collect::<HashSet<_>>().len() as f64 / w as f64)
        .collect();
    ratios.iter().sum::<f64>() / ratios.len() as f64
}

fn texts() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0usize..8, 1..=50)
}

proptest! {
    #[test]
    fn rer_sign_law(baseline in 0.0f64..99.99, comparison in 0.0f64..=100.0) {
        let rer = relative_error_rate(baseline, comparison).unwrap();
        prop_assert!(rer.is_finite());
        prop_assert_eq!(rer > 0.0, comparison < baseline);
        prop_assert_eq!(rer < 0.0, comparison > baseline);
        prop_assert_eq!(relative_error_rate(baseline, baseline).unwrap(), 0.0);
    }

    #[test]
    fn mattr_matches_enumeration(ids in texts(), window in 1usize..60) {
        let tokens: Vec<String> = ids.iter().map(|i| format!("t{i}")).collect();
        let value = mattr(&tokens, window).unwrap();
        prop_assert!(value > 0.0 && value <= 1.0);
        prop_assert!((value - windows_by_enumeration(&tokens, window)).abs() < 1e-12);
    }

    #[test]
    fn mattr_invariant_to_relabeling(ids in texts(), window in 1usize..20, perm in Just((0usize..8).collect::<Vec<_>>()).prop_shuffle()) {
        let original: Vec<String> = ids.iter().map(|i| format!("t{i}")).collect();
        let relabeled: Vec<String> = ids.iter().map(|&i| format!("word-{}", perm[i])).collect();
        prop_assert_eq!(mattr(&original, window).unwrap(), mattr(&relabeled, window).unwrap());
    }

    #[test]
    fn mattr_uniform_repetition_bound(k in 1usize..6, reps in 1usize..10, window in 1usize..50) {
        let tokens: Vec<String> = (0..k * reps).map(|i| format!("t{}", i % k)).collect();
        prop_assume!(window <= tokens.len());
        let value = mattr(&tokens, window).unwrap();
        let bound = (k.min(window) as f64 / window as f64).min(1.0);
        prop_assert!(value <= bound + 1e-12);
    }

    #[test]
    fn zscores_are_standardized(values in proptest::collection::vec(-1e3f64..1e3, 2..30)) {
        prop_assume!(sample_sd(&values) > 1e-6);
        let z: Vec<f64> = zscore(&values).unwrap().iter().map(|s| s.z).collect();
        prop_assert!(mean(&z).abs() < 1e-12);
        prop_assert!((sample_sd(&z) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn las_never_exceeds_uas(
        rows in proptest::collection::vec((0usize..4, 0usize..4, 0usize..3, 0usize..3, any::<bool>()), 1..30)
    ) {
        let labels = ["a", "b", "c"];
        let gold = DepSentence {
            tokens: rows
                .iter()
                .enumerate()
                .map(|(i, r)| DepToken::new(i + 1, "w", if r.4 { "PUNCT" } else { "X" }, r.0, labels[r.2]))
                .collect(),
            sent_id: None,
            language: "tst".into(),
        };
        let predicted = Prediction {
            heads: rows.iter().map(|r| r.1).collect(),
            deprels: rows.iter().map(|r| labels[r.3].to_string()).collect(),
        };
        for punct in [PunctPolicy::Include, PunctPolicy::Exclude] {
            if let Ok(score) = evaluate(std::slice::from_ref(&gold), std::slice::from_ref(&predicted), punct) {
                prop_assert!(0.0 <= score.las && score.las <= score.uas && score.uas <= 100.0);
            }
        }
    }
}
