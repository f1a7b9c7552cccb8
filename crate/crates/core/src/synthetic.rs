//! Deterministic toy grammar used as a learnability oracle.
//!
//! Sentences follow `NP VERB NP{0,2} ADV? .` with `NP = DET? ADJ{0,2} NOUN`.
//! Heads are fixed by the grammar: determiners and adjectives attach to the
//! noun of their phrase, nouns, adverbs and the final period attach to the
//! verb, and the verb attaches to the root. Labels follow from POS and from
//! the side of the verb a noun is on.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::lexicon::EmbeddingTable;
use crate::treebank::{DepSentence, DepToken};

const DET: &[&str] = &["the", "a", "this", "every"];
const ADJ: &[&str] = &["red", "small", "old", "quiet", "bright", "heavy", "young", "cold"];
const NOUN: &[&str] = &[
    "dog", "river", "house", "teacher", "stone", "child", "market", "song", "boat", "tree",
    "letter", "farmer",
];
const VERB: &[&str] = &["sees", "gives", "finds", "carries", "likes", "builds", "hears", "takes"];
const ADV: &[&str] = &["today", "slowly", "again", "often", "there"];

/// Every (form, UPOS) pair the grammar can produce.
pub fn grammar_lexicon() -> Vec<(&'static str, &'static str)> {
    let mut out = Vec::new();
    for (words, tag) in [(DET, "DET"), (ADJ, "ADJ"), (NOUN, "NOUN"), (VERB, "VERB"), (ADV, "ADV")] {
        out.extend(words.iter().map(|w| (*w, tag)));
    }
    out.push((".", "PUNCT"));
    out
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty word list")
}

/// Appends a noun phrase; returns the positions of its dependents and of the noun.
fn noun_phrase(rng: &mut ChaCha8Rng, out: &mut Vec<(String, &'static str)>) -> (Vec<usize>, usize) {
    let mut deps = Vec::new();
    if rng.gen_bool(0.7) {
        out.push((pick(rng, DET).into(), "DET"));
        deps.push(out.len());
    }
    for _ in 0..rng.gen_range(0..=2) {
        out.push((pick(rng, ADJ).into(), "ADJ"));
        deps.push(out.len());
    }
    out.push((pick(rng, NOUN).into(), "NOUN"));
    (deps, out.len())
}

fn grammar_sentence(rng: &mut ChaCha8Rng, language: &str, index: usize) -> DepSentence {
    let mut words: Vec<(String, &'static str)> = Vec::new();
    let mut heads: Vec<(usize, usize, &'static str)> = Vec::new();

    let (mods, subject) = noun_phrase(rng, &mut words);
    words.push((pick(rng, VERB).into(), "VERB"));
    let verb = words.len();
    heads.extend(mods.iter().map(|&m| (m, subject, "")));
    heads.push((subject, verb, "nsubj"));
    heads.push((verb, 0, "root"));
    for _ in 0..rng.gen_range(0..=2) {
        let (mods, object) = noun_phrase(rng, &mut words);
        heads.extend(mods.iter().map(|&m| (m, object, "")));
        heads.push((object, verb, "obj"));
    }
    if rng.gen_bool(0.4) {
        words.push((pick(rng, ADV).into(), "ADV"));
        heads.push((words.len(), verb, "advmod"));
    }
    words.push((".".into(), "PUNCT"));
    heads.push((words.len(), verb, "punct"));

    heads.sort_by_key(|&(d, _, _)| d);
    let tokens = heads
        .into_iter()
        .map(|(d, h, rel)| {
            let (form, tag) = &words[d - 1];
            let rel = match (rel, *tag) {
                ("", "DET") => "det",
                ("", _) => "amod",
                (r, _) => r,
            };
            DepToken::new(d, form, tag, h, rel)
        })
        .collect();
    DepSentence {
        tokens,
        sent_id: Some(format!("{language}-{}", index + 1)),
        language: language.to_string(),
    }
}

/// `count` sentences from the toy grammar, deterministic in `seed`.
pub fn grammar_treebank(count: usize, seed: u64, language: &str) -> Vec<DepSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| grammar_sentence(&mut rng, language, i)).collect()
}

/// Random static vectors for the grammar's vocabulary, deterministic in `seed`.
pub fn grammar_embeddings(dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.5).expect("valid normal");
    let mut table = EmbeddingTable::new(dim)?;
    for (word, _) in grammar_lexicon() {
        let v = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        table.insert(word, v)?;
    }
    Ok(table)
}
