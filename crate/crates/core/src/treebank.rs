//! CoNLL-U reading and writing, tree validation, and corpus splitting.
//!
//! Multiword-token range lines (`3-4`) and empty nodes (`5.1`) are skipped:
//! everything downstream operates on syntactic words only.

use std::fmt::Write as _;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// UPOS tag treated as punctuation by the optional evaluation filter.
pub const PUNCT_UPOS: &str = "PUNCT";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepToken {
    /// 1-based position in the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// Head position, 0 for the artificial root.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl DepToken {
    /// Token with only the columns the parser uses filled in.
    pub fn new(id: usize, form: &str, upos: &str, head: usize, deprel: &str) -> Self {
        DepToken {
            id,
            form: form.to_string(),
            lemma: "_".to_string(),
            upos: upos.to_string(),
            xpos: "_".to_string(),
            feats: "_".to_string(),
            head,
            deprel: deprel.to_string(),
            deps: "_".to_string(),
            misc: "_".to_string(),
        }
    }

    pub fn is_punct(&self) -> bool {
        self.upos == PUNCT_UPOS
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepSentence {
    pub tokens: Vec<DepToken>,
    pub sent_id: Option<String>,
    pub language: String,
}

impl DepSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreebankSplit {
    pub train: Vec<DepSentence>,
    pub dev: Vec<DepSentence>,
    pub test: Vec<DepSentence>,
}

impl TreebankSplit {
    /// Sentence counts as (train, dev, test).
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }
}

fn parse_index(field: &str, line: usize, column: &str) -> Result<usize> {
    field.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("{column} is not a non-negative integer: {field:?}"),
    })
}

/// Parse CoNLL-U text into sentences tagged with `language`.
pub fn parse_conllu(text: &str, language: &str) -> Result<Vec<DepSentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut sent_id = None;

    let mut flush = |tokens: &mut Vec<DepToken>, sent_id: &mut Option<String>| {
        if !tokens.is_empty() {
            sentences.push(DepSentence {
                tokens: std::mem::take(tokens),
                sent_id: sent_id.take(),
                language: language.to_string(),
            });
        } else {
            *sent_id = None;
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut sent_id);
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id = parse_index(cols[0], line_no, "ID")?;
        if id == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "token ID must be at least 1".to_string(),
            });
        }
        let head = parse_index(cols[6], line_no, "HEAD")?;
        tokens.push(DepToken {
            id,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            head,
            deprel: cols[7].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        });
    }
    flush(&mut tokens, &mut sent_id);
    Ok(sentences)
}

/// Serialize sentences back to CoNLL-U. Each sentence ends with a blank line.
pub fn write_conllu(sentences: &[DepSentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        if let Some(id) = &sentence.sent_id {
            let _ = writeln!(out, "# sent_id = {id}");
        }
        for t in &sentence.tokens {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id, t.form, t.lemma, t.upos, t.xpos, t.feats, t.head, t.deprel, t.deps, t.misc
            );
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeReport {
    /// Number of tokens attached to the artificial root.
    pub roots: usize,
    pub acyclic: bool,
    pub projective: bool,
    /// Every head index lies in `0..=n` and no token heads itself.
    pub heads_in_range: bool,
}

impl TreeReport {
    /// A single-rooted, acyclic, well-indexed tree.
    pub fn is_well_formed(&self) -> bool {
        self.roots == 1 && self.acyclic && self.heads_in_range
    }
}

/// Structural checks over a head array (`heads[d-1]` is the head of token `d`).
pub fn validate_heads(heads: &[usize]) -> TreeReport {
    let n = heads.len();
    let heads_in_range = heads
        .iter()
        .enumerate()
        .all(|(i, &h)| h <= n && h != i + 1);
    let roots = heads.iter().filter(|&&h| h == 0).count();

    // Walk up from every token; in an acyclic graph each walk reaches 0
    // (or leaves the index range) within n steps.
    let acyclic = heads_in_range
        && (1..=n).all(|start| {
            let mut node = start;
            for _ in 0..=n {
                if node == 0 {
                    return true;
                }
                node = heads[node - 1];
            }
            false
        });

    let arcs: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .filter(|&(_, &h)| h <= n)
        .map(|(i, &h)| (h.min(i + 1), h.max(i + 1)))
        .collect();
    let projective = arcs.iter().enumerate().all(|(i, &(l1, r1))| {
        arcs[i + 1..]
            .iter()
            .all(|&(l2, r2)| !((l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1)))
    });

    TreeReport {
        roots,
        acyclic,
        projective,
        heads_in_range,
    }
}

pub fn validate_tree(sentence: &DepSentence) -> TreeReport {
    validate_heads(&sentence.heads())
}

/// Shuffle with `seed`, then allocate `floor(n * ratio)` sentences to dev and
/// test; the remainder goes to train. Within each split, corpus order is kept.
pub fn split_treebank(
    sentences: &[DepSentence],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<TreebankSplit> {
    if sentences.is_empty() {
        return invalid("cannot split an empty treebank");
    }
    if sentences.len() < 3 {
        return invalid(format!(
            "need at least 3 sentences to split, got {}",
            sentences.len()
        ));
    }
    let (r_train, r_dev, r_test) = ratios;
    if !(r_train > 0.0 && r_dev > 0.0 && r_test > 0.0) {
        return invalid(format!("split ratios must be positive: {ratios:?}"));
    }
    if ((r_train + r_dev + r_test) - 1.0).abs() > 1e-9 {
        return invalid(format!("split ratios must sum to 1: {ratios:?}"));
    }

    let n = sentences.len();
    let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let n_dev = floor(r_dev);
    let n_test = floor(r_test);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let take = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| sentences[i].clone()).collect::<Vec<_>>()
    };
    Ok(TreebankSplit {
        dev: take(&order[..n_dev]),
        test: take(&order[n_dev..n_dev + n_test]),
        train: take(&order[n_dev + n_test..]),
    })
}

/// Uniform sample of `n` sentences without replacement, in corpus order.
pub fn subsample(sentences: &[DepSentence], n: usize, seed: u64) -> Result<Vec<DepSentence>> {
    if n > sentences.len() {
        return invalid(format!(
            "cannot subsample {n} sentences from {}",
            sentences.len()
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, sentences.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| sentences[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(heads: &[usize]) -> DepSentence {
        DepSentence {
            tokens: heads
                .iter()
                .enumerate()
                .map(|(i, &h)| DepToken::new(i + 1, &format!("w{i}"), "X", h, "dep"))
                .collect(),
            sent_id: None,
            language: "tst".into(),
        }
    }

    const TWO_TOKENS: &str = "# sent_id = s1\n\
        1\tHe\the\tPRON\t_\t_\t2\tsubj\t_\t_\n\
        2\truns\trun\tVERB\t_\t_\t0\troot\t_\t_\n\n";

    #[test]
    fn parses_minimal_sentence() {
        let s = parse_conllu(TWO_TOKENS, "eng").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 2);
        assert_eq!(s[0].heads(), vec![2, 0]);
        assert_eq!(s[0].sent_id.as_deref(), Some("s1"));
        assert_eq!(s[0].language, "eng");
    }

    #[test]
    fn skips_ranges_and_empty_nodes() {
        let text = "1\tI\t_\tPRON\t_\t_\t2\tsubj\t_\t_\n\
            2\twent\t_\tVERB\t_\t_\t0\troot\t_\t_\n\
            3-4\tau\t_\t_\t_\t_\t_\t_\t_\t_\n\
            3\tà\t_\tADP\t_\t_\t4\tcase\t_\t_\n\
            4\tle\t_\tDET\t_\t_\t2\tcomp\t_\t_\n\
            4.1\tgone\t_\tVERB\t_\t_\t_\t_\t_\t_\n";
        let s = parse_conllu(text, "fra").unwrap();
        assert_eq!(s.len(), 1);
        let ids: Vec<usize> = s[0].tokens.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
        assert_eq!(s[0].tokens[2].form, "à");
    }

    #[test]
    fn rejects_short_line_with_line_number() {
        let text = "1\tHe\the\tPRON\t_\t_\t2\tsubj\t_\t_\n2\truns\trun\tVERB\t_\t_\t0\troot\t_\n";
        match parse_conllu(text, "eng") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_integer_head() {
        let text = "1\tHe\the\tPRON\t_\t_\tx\tsubj\t_\t_\n";
        assert!(matches!(
            parse_conllu(text, "eng"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn round_trips() {
        let s = parse_conllu(TWO_TOKENS, "eng").unwrap();
        let again = parse_conllu(&write_conllu(&s), "eng").unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn chain_is_valid_projective() {
        let r = validate_heads(&[0, 1, 2]);
        assert_eq!(r.roots, 1);
        assert!(r.acyclic && r.projective && r.is_well_formed());
    }

    #[test]
    fn two_cycle_flagged() {
        let r = validate_heads(&[2, 1]);
        assert!(!r.acyclic);
        assert_eq!(r.roots, 0);
    }

    #[test]
    fn crossing_arcs_non_projective() {
        // 1 -> 3 and 2 -> 4 cross; 1 is attached to the root.
        let r = validate_heads(&[0, 1, 1, 2]);
        assert!(r.acyclic);
        assert!(!r.projective);
        let tree = validate_tree(&sent(&[0, 1, 1, 2]));
        assert_eq!(tree, r);
    }

    #[test]
    fn self_loop_out_of_range() {
        assert!(!validate_heads(&[1]).heads_in_range);
        assert!(!validate_heads(&[0, 5]).heads_in_range);
    }

    #[test]
    fn ten_sentences_split_8_1_1() {
        let data: Vec<_> = (0..10).map(|_| sent(&[0])).collect();
        let split = split_treebank(&data, (0.8, 0.1, 0.1), 3).unwrap();
        assert_eq!(split.counts(), (8, 1, 1));
    }

    #[test]
    fn remainder_goes_to_train() {
        let data: Vec<_> = (0..459).map(|_| sent(&[0])).collect();
        let split = split_treebank(&data, (0.8, 0.1, 0.1), 3).unwrap();
        let (tr, dv, te) = split.counts();
        assert_eq!((tr, dv, te), (369, 45, 45));
        assert_eq!(tr + dv + te, 459);
    }

    #[test]
    fn split_errors() {
        assert!(split_treebank(&[], (0.8, 0.1, 0.1), 0).is_err());
        let data: Vec<_> = (0..5).map(|_| sent(&[0])).collect();
        assert!(split_treebank(&data, (0.8, 0.2, 0.0), 0).is_err());
        assert!(split_treebank(&data, (0.5, 0.1, 0.1), 0).is_err());
    }

    #[test]
    fn subsample_edges() {
        let data: Vec<_> = (0..20)
            .map(|i| {
                let mut s = sent(&[0]);
                s.sent_id = Some(i.to_string());
                s
            })
            .collect();
        assert_eq!(subsample(&data, 20, 1).unwrap(), data);
        assert!(subsample(&data, 0, 1).unwrap().is_empty());
        assert!(subsample(&data, 21, 1).is_err());
        let a = subsample(&data, 7, 9).unwrap();
        assert_eq!(a, subsample(&data, 7, 9).unwrap());
        assert_eq!(a.len(), 7);
    }

    #[test]
    fn subsample_large_corpus() {
        let data: Vec<_> = (0..13_074).map(|_| sent(&[0])).collect();
        assert_eq!(subsample(&data, 10_000, 42).unwrap().len(), 10_000);
    }
}
