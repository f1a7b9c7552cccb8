use deplab::decoder::{brute_force_mst, chu_liu_edmonds, ArcScoreMatrix};
use deplab::treebank::validate_heads;
use ndarray::Array2;
use proptest::prelude::*;

fn matrix(n: usize, values: &[f64]) -> ArcScoreMatrix {
    ArcScoreMatrix::new(Array2::from_shape_vec((n + 1, n), values.to_vec()).unwrap()).unwrap()
}

fn real_scores() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=6).prop_flat_map(|n| (Just(n), proptest::collection::vec(-5.0f64..5.0, (n + 1) * n)))
}

fn int_scores() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=6).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec((-4i32..=4).prop_map(f64::from), (n + 1) * n),
        )
    })
}

proptest! {
    #[test]
    fn cle_matches_brute_force_on_reals((n, values) in real_scores(), single_root in any::<bool>()) {
        let scores = matrix(n, &values);
        let cle = chu_liu_edmonds(&scores, single_root).unwrap();
        let brute = brute_force_mst(&scores, single_root).unwrap();
        prop_assert!((scores.tree_score(&cle) - scores.tree_score(&brute)).abs() <= 1e-9);
        let report = validate_heads(&cle);
        prop_assert!(report.acyclic && report.heads_in_range);
        if single_root {
            prop_assert_eq!(report.roots, 1);
        }
    }

    #[test]
    fn cle_matches_brute_force_exactly_on_integers((n, values) in int_scores()) {
        let scores = matrix(n, &values);
        let cle = chu_liu_edmonds(&scores, true).unwrap();
        let brute = brute_force_mst(&scores, true).unwrap();
        prop_assert_eq!(scores.tree_score(&cle), scores.tree_score(&brute));
        prop_assert_eq!(cle, brute);
    }

    #[test]
    fn column_shift_moves_total_only(
        (n, values) in int_scores(),
        dep_pick in any::<prop::sample::Index>(),
        c in -6i32..=6,
        single_root in any::<bool>(),
    ) {
        let scores = matrix(n, &values);
        let d = dep_pick.index(n);
        let mut shifted = scores.matrix().clone();
        shifted.column_mut(d).mapv_inplace(|v| v + f64::from(c));
        let shifted = ArcScoreMatrix::new(shifted).unwrap();
        let before = chu_liu_edmonds(&scores, single_root).unwrap();
        let after = chu_liu_edmonds(&shifted, single_root).unwrap();
        prop_assert_eq!(&after, &before);
        prop_assert_eq!(shifted.tree_score(&after), scores.tree_score(&before) + f64::from(c));
    }
}
