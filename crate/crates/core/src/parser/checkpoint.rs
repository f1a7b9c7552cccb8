use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{Hyperparams, ParserParams};
use crate::error::{Error, Result};
use crate::lexicon::{EmbeddingTable, Vocabulary};

const MAGIC: &[u8; 8] = b"DEPLABCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained parser with everything needed to run it again.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub hyperparams: Hyperparams,
    pub params: ParserParams,
    pub vocab: Vocabulary,
    pub vocab_fingerprint: String,
    pub embedding_fingerprint: Option<String>,
}

pub fn embedding_fingerprint(table: &EmbeddingTable) -> String {
    format!("{:x}", Sha256::digest(table.to_text().as_bytes()))
}

impl Checkpoint {
    pub fn new(
        hyperparams: Hyperparams,
        params: ParserParams,
        vocab: Vocabulary,
        table: Option<&EmbeddingTable>,
    ) -> Self {
        Checkpoint {
            vocab_fingerprint: vocab.fingerprint(),
            embedding_fingerprint: table.map(embedding_fingerprint),
            hyperparams,
            params,
            vocab,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let body = bincode::serialize(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a parser checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let ck: Checkpoint =
            bincode::deserialize(&bytes[12..]).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.vocab.fingerprint() != ck.vocab_fingerprint {
            return Err(Error::Checkpoint("vocabulary fingerprint mismatch".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Fails when `table` differs from the one recorded at training time.
    pub fn check_embeddings(&self, table: Option<&EmbeddingTable>) -> Result<()> {
        let given = table.map(embedding_fingerprint);
        if given != self.embedding_fingerprint {
            return Err(Error::Checkpoint(
                "embedding table differs from the one used in training".into(),
            ));
        }
        Ok(())
    }
}
