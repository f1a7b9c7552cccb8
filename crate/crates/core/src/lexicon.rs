//! Static word vectors and training-split vocabularies.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::treebank::DepSentence;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const RESERVED: [&str; 2] = ["<pad>", "<unk>"];

/// Pre-trained vectors in the usual word-vector text format.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    /// Initial value of the fallback vector; the parser owns a trainable copy.
    pub unk_vector: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Embedding("dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            unk_vector: vec![0.0; dim],
        })
    }

    /// Insert a vector; returns false (and keeps the old vector) for duplicates.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Embedding(format!(
                "vector for {word:?} has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(word) {
            return Ok(false);
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.vectors.push(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    /// Exact match first, then lowercase.
    pub fn resolve(&self, word: &str) -> Option<&[f64]> {
        self.get(word).or_else(|| {
            let lower = word.to_lowercase();
            if lower != word {
                self.get(&lower)
            } else {
                None
            }
        })
    }

    /// Text serialization with a `count dim` header. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.words.len(), self.dim);
        for (word, vector) in self.words.iter().zip(&self.vectors) {
            out.push_str(word);
            for v in vector {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Parse word vectors. A leading `count dim` line is treated as a header and
/// its dimension must equal `expected_dim`.
pub fn load_embeddings(text: &str, expected_dim: usize) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(expected_dim)?;
    let mut saw_line = false;
    for (idx, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let rest: Vec<&str> = fields.collect();
        if idx == 0 && rest.len() == 1 {
            if let (Ok(_), Ok(dim)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                if dim != expected_dim {
                    return Err(Error::Embedding(format!(
                        "header declares dimension {dim}, expected {expected_dim}"
                    )));
                }
                saw_line = true;
                continue;
            }
        }
        saw_line = true;
        if rest.len() != expected_dim {
            return Err(Error::Embedding(format!(
                "line {}: token {word:?} has {} values, expected {expected_dim}",
                idx + 1,
                rest.len()
            )));
        }
        let vector = rest
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::Embedding(format!("line {}: token {word:?}: bad value {v:?}", idx + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        table.insert(word, vector)?;
    }
    if !saw_line {
        return Err(Error::Embedding("empty embedding file".into()));
    }
    Ok(table)
}

/// A string inventory with reserved PAD/UNK slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Index {
    items: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl From<Vec<String>> for Index {
    fn from(items: Vec<String>) -> Self {
        let mut index = Index {
            items,
            lookup: HashMap::new(),
        };
        index.rebuild();
        index
    }
}

impl From<Index> for Vec<String> {
    fn from(index: Index) -> Self {
        index.items
    }
}

impl Index {
    fn from_sorted(reserved: &[&str], items: impl IntoIterator<Item = String>) -> Self {
        reserved
            .iter()
            .map(|s| s.to_string())
            .chain(items)
            .collect::<Vec<_>>()
            .into()
    }

    fn rebuild(&mut self) {
        self.lookup = self
            .items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.lookup.get(item).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub word_index: Index,
    pub char_index: Index,
    pub pos_index: Index,
    /// Dependency relations; no reserved slots, ids are label ids.
    pub label_index: Index,
    pub min_frequency: usize,
}

impl Vocabulary {
    pub fn num_labels(&self) -> usize {
        self.label_index.len()
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.word_index
            .get(form)
            .or_else(|| self.word_index.get(&form.to_lowercase()))
            .unwrap_or(UNK)
    }

    pub fn char_ids(&self, form: &str) -> Vec<usize> {
        form.chars()
            .map(|c| self.char_index.get(c.encode_utf8(&mut [0; 4])).unwrap_or(UNK))
            .collect()
    }

    pub fn pos_id(&self, upos: &str) -> usize {
        self.pos_index.get(upos).unwrap_or(UNK)
    }

    pub fn label_id(&self, deprel: &str) -> Option<usize> {
        self.label_index.get(deprel)
    }

    /// SHA-256 over the index contents, recorded in checkpoints.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for index in [
            &self.word_index,
            &self.char_index,
            &self.pos_index,
            &self.label_index,
        ] {
            for item in &index.items {
                hasher.update(item.as_bytes());
                hasher.update([0u8]);
            }
            hasher.update([0xffu8]);
        }
        format!("{:x}", hasher.finalize())
    }
}

/// Word forms below `min_frequency` are left out (they resolve to UNK);
/// characters, POS tags, and relations are indexed exhaustively. All
/// inventories are sorted, so the result depends only on the multiset of
/// training tokens.
pub fn build_vocab(train: &[DepSentence], min_frequency: usize) -> Vocabulary {
    let mut words: BTreeMap<&str, usize> = BTreeMap::new();
    let mut chars = BTreeSet::new();
    let mut tags = BTreeSet::new();
    let mut labels = BTreeSet::new();
    for token in train.iter().flat_map(|s| &s.tokens) {
        *words.entry(token.form.as_str()).or_default() += 1;
        chars.extend(token.form.chars().map(String::from));
        tags.insert(token.upos.clone());
        labels.insert(token.deprel.clone());
    }
    let kept = words
        .into_iter()
        .filter(|&(_, c)| c >= min_frequency)
        .map(|(w, _)| w.to_string());
    Vocabulary {
        word_index: Index::from_sorted(&RESERVED, kept),
        char_index: Index::from_sorted(&RESERVED, chars),
        pos_index: Index::from_sorted(&RESERVED, tags),
        label_index: Index::from_sorted(&[], labels),
        min_frequency,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TokenLookup<'a> {
    pub word_id: usize,
    pub char_ids: Vec<usize>,
    /// Pre-trained vector, or `None` when the token falls back to UNK.
    pub vector: Option<&'a [f64]>,
}

impl TokenLookup<'_> {
    /// The static vector with the table's UNK fallback applied.
    pub fn vector_or_unk<'t>(&'t self, table: &'t EmbeddingTable) -> &'t [f64] {
        self.vector.unwrap_or(&table.unk_vector)
    }
}

pub fn lookup<'a>(vocab: &Vocabulary, table: &'a EmbeddingTable, token: &str) -> TokenLookup<'a> {
    TokenLookup {
        word_id: vocab.word_id(token),
        char_ids: vocab.char_ids(token),
        vector: table.resolve(token),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::DepToken;

    fn sentence(words: &[(&str, &str)]) -> DepSentence {
        DepSentence {
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, (w, p))| DepToken::new(i + 1, w, p, 0, "dep"))
                .collect(),
            sent_id: None,
            language: "tst".into(),
        }
    }

    #[test]
    fn loads_two_lines() {
        let t = load_embeddings("na 1 2 3\nni 4 5 6\n", 3).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("ni"), Some(&[4.0, 5.0, 6.0][..]));
    }

    #[test]
    fn short_line_under_header_is_rejected() {
        let mut text = String::from("1000 300\ntok");
        for _ in 0..299 {
            text.push_str(" 0.5");
        }
        let err = load_embeddings(&text, 300).unwrap_err();
        assert!(err.to_string().contains("tok"));
    }

    #[test]
    fn header_dim_must_match() {
        assert!(load_embeddings("2 4\na 1 2 3 4\n", 3).is_err());
    }

    #[test]
    fn empty_file_rejected() {
        assert!(load_embeddings("", 3).is_err());
        assert!(load_embeddings("\n\n", 3).is_err());
    }

    #[test]
    fn duplicate_keeps_first() {
        let t = load_embeddings("na 1 1\nna 2 2\n", 2).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("na"), Some(&[1.0, 1.0][..]));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut t = EmbeddingTable::new(2).unwrap();
        t.insert("a", vec![0.1 + 0.2, -1e-300]).unwrap();
        t.insert("b", vec![std::f64::consts::PI, 7.0]).unwrap();
        let back = load_embeddings(&t.to_text(), 2).unwrap();
        assert_eq!(back.get("a"), t.get("a"));
        assert_eq!(back.get("b"), t.get("b"));
    }

    #[test]
    fn min_frequency_cutoff() {
        let train = vec![sentence(&[("a", "NOUN"), ("a", "VERB"), ("a", "NOUN"), ("b", "NOUN")])];
        let v = build_vocab(&train, 2);
        assert!(v.word_index.get("a").is_some());
        assert_eq!(v.word_id("b"), UNK);
        let all = build_vocab(&train, 1);
        assert!(all.word_index.get("b").is_some());
        // two tags plus PAD and UNK
        assert_eq!(v.pos_index.len(), 2 + RESERVED.len());
        assert!(v.pos_index.get("NOUN").is_some() && v.pos_index.get("VERB").is_some());
    }

    #[test]
    fn lookup_case_fallback() {
        let train = vec![sentence(&[("the", "DET"), ("the", "DET")])];
        let vocab = build_vocab(&train, 1);
        let table = load_embeddings("the 1 2\n", 2).unwrap();

        let hit = lookup(&vocab, &table, "the");
        assert_eq!(hit.vector, Some(&[1.0, 2.0][..]));

        let lowered = lookup(&vocab, &table, "The");
        assert_eq!(lowered.vector, Some(&[1.0, 2.0][..]));
        assert_eq!(lowered.word_id, vocab.word_id("the"));

        let miss = lookup(&vocab, &table, "Ndiyahamba");
        assert_eq!(miss.vector, None);
        assert_eq!(miss.vector_or_unk(&table), &table.unk_vector[..]);
        assert_eq!(miss.word_id, UNK);
    }
}
