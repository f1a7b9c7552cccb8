use std::collections::HashSet;

use deplab::lexicon::{build_vocab, load_embeddings, lookup, EmbeddingTable, UNK};
use deplab::treebank::{
    parse_conllu, split_treebank, subsample, validate_heads, write_conllu, DepSentence, DepToken,
};
use proptest::prelude::*;

fn sentence_strategy() -> impl Strategy<Value = DepSentence> {
    (1usize..8)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(
                    ("[A-Za-z]{1,6}", "[A-Z]{1,5}", 0..=n, "[a-z]{1,6}(:[a-z]{1,3})?"),
                    n,
                ),
                proptest::option::of("[a-z0-9-]{1,8}"),
            )
        })
        .prop_map(|(rows, sent_id)| DepSentence {
            tokens: rows
                .into_iter()
                .enumerate()
                .map(|(i, (form, upos, head, rel))| DepToken::new(i + 1, &form, &upos, head, &rel))
                .collect(),
            sent_id,
            language: "tst".into(),
        })
}

fn corpus(n: usize) -> Vec<DepSentence> {
    (0..n)
        .map(|i| DepSentence {
            tokens: vec![DepToken::new(1, "w", "X", 0, "root")],
            sent_id: Some(format!("s{i}")),
            language: "tst".into(),
        })
        .collect()
}

fn ids(sentences: &[DepSentence]) -> Vec<String> {
    sentences.iter().map(|s| s.sent_id.clone().unwrap()).collect()
}

/// Peel off tokens attached to the root or to already-peeled tokens; the
/// graph is acyclic iff everything gets peeled.
fn oracle_acyclic(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().enumerate().any(|(i, &h)| h > n || h == i + 1) {
        return false;
    }
    let mut done = vec![false; n + 1];
    done[0] = true;
    loop {
        let mut progress = false;
        for d in 1..=n {
            if !done[d] && done[heads[d - 1]] {
                done[d] = true;
                progress = true;
            }
        }
        if !progress {
            return done.iter().all(|&x| x);
        }
    }
}

/// Two arcs cross iff one endpoint of the second lies strictly inside the
/// first's span and the other strictly outside it.
fn oracle_projective(heads: &[usize]) -> bool {
    let spans: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| (h.min(i + 1), h.max(i + 1)))
        .collect();
    for a in &spans {
        for b in &spans {
            let inside = |p: usize| a.0 < p && p < a.1;
            let outside = |p: usize| p < a.0 || p > a.1;
            if (inside(b.0) && outside(b.1)) || (inside(b.1) && outside(b.0)) {
                return false;
            }
        }
    }
    true
}

proptest! {
    #[test]
    fn conllu_round_trip(sentences in proptest::collection::vec(sentence_strategy(), 1..5)) {
        let text = write_conllu(&sentences);
        prop_assert_eq!(parse_conllu(&text, "tst").unwrap(), sentences);
    }

    #[test]
    fn split_partitions_input(n in 3usize..80, seed in any::<u64>()) {
        let input = corpus(n);
        let split = split_treebank(&input, (0.8, 0.1, 0.1), seed).unwrap();
        let (train, dev, test) = (ids(&split.train), ids(&split.dev), ids(&split.test));
        prop_assert_eq!(train.len() + dev.len() + test.len(), n);
        let mut all: Vec<String> = train.iter().chain(&dev).chain(&test).cloned().collect();
        let unique: HashSet<&String> = all.iter().collect();
        prop_assert_eq!(unique.len(), n);
        all.sort();
        let mut expected = ids(&input);
        expected.sort();
        prop_assert_eq!(all, expected);
        prop_assert_eq!(dev.len(), n / 10);
        prop_assert_eq!(test.len(), n / 10);
    }

    #[test]
    fn subsample_is_ordered_subset(n in 1usize..60, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let input = corpus(n);
        let k = ((n as f64) * frac) as usize;
        let picked = subsample(&input, k, seed).unwrap();
        prop_assert_eq!(picked.len(), k);
        let positions: Vec<usize> = picked
            .iter()
            .map(|s| input.iter().position(|t| t == s).unwrap())
            .collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(subsample(&input, n, seed).unwrap(), input);
    }

    #[test]
    fn validate_matches_brute_force(heads in (1usize..=6).prop_flat_map(|n| proptest::collection::vec(0..=n, n))) {
        let report = validate_heads(&heads);
        let n = heads.len();
        let in_range = heads.iter().enumerate().all(|(i, &h)| h <= n && h != i + 1);
        prop_assert_eq!(report.heads_in_range, in_range);
        prop_assert_eq!(report.acyclic, oracle_acyclic(&heads));
        prop_assert_eq!(report.roots, heads.iter().filter(|&&h| h == 0).count());
        prop_assert_eq!(report.projective, oracle_projective(&heads));
    }

    #[test]
    fn embeddings_round_trip(
        rows in proptest::collection::btree_map("[a-z]{1,8}", proptest::collection::vec(-1e3f64..1e3, 3), 1..10)
    ) {
        let mut table = EmbeddingTable::new(3).unwrap();
        for (w, v) in &rows {
            table.insert(w, v.clone()).unwrap();
        }
        let back = load_embeddings(&table.to_text(), 3).unwrap();
        for (w, v) in &rows {
            prop_assert_eq!(back.get(w).unwrap(), v.as_slice());
        }
        prop_assert_eq!(back.len(), rows.len());
    }

    #[test]
    fn vocab_is_deterministic_and_lookups_in_bounds(
        sentences in proptest::collection::vec(sentence_strategy(), 1..6),
        probe in "[A-Za-z]{1,6}",
    ) {
        let a = build_vocab(&sentences, 1);
        let b = build_vocab(&sentences, 1);
        prop_assert_eq!(&a, &b);
        let mut table = EmbeddingTable::new(2).unwrap();
        table.insert(&probe.to_lowercase(), vec![0.5, -0.5]).unwrap();
        let hit = lookup(&a, &table, &probe);
        prop_assert!(hit.word_id < a.word_index.len());
        prop_assert!(hit.char_ids.iter().all(|&c| c < a.char_index.len()));
        let known = sentences.iter().flat_map(|s| s.forms()).any(|f| f == probe || f == probe.to_lowercase());
        prop_assert_eq!(hit.word_id == UNK, !known);
        prop_assert!(hit.vector.is_some());
    }
}
