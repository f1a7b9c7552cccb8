use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::AnalysisOptions;
use crate::error::{Error, Result};
use crate::metrics::PunctPolicy;
use crate::parser::{EvalOptions, GridSpec, Hyperparams};

/// Where scores come from: the built-in parser, or ingested score files only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Internal,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticLanguage {
    #[serde(default = "default_synthetic_sentences")]
    pub sentences: usize,
    #[serde(default = "default_one")]
    pub seed: u64,
    /// Generate static vectors of this size for the grammar's words.
    #[serde(default)]
    pub embedding_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageConfig {
    pub code: String,
    /// One CoNLL-U file, split by `split_ratios`.
    #[serde(default)]
    pub treebank: Option<PathBuf>,
    /// Pre-split CoNLL-U files (test optional).
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub dev: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticLanguage>,
    /// Static vectors in word2vec text format.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub embedding_dim: Option<usize>,
    /// Subsample the training split to this many sentences.
    #[serde(default)]
    pub train_sentences: Option<usize>,
    /// Training size used by the scaling analysis instead of the split size.
    #[serde(default)]
    pub train_count: Option<f64>,
    /// MATTR used instead of the one computed from the training split.
    #[serde(default)]
    pub mattr: Option<f64>,
}

impl LanguageConfig {
    pub fn has_data(&self) -> bool {
        self.treebank.is_some() || self.train.is_some() || self.synthetic.is_some()
    }

    fn paths(&self) -> Vec<&PathBuf> {
        [&self.treebank, &self.train, &self.dev, &self.test, &self.embeddings]
            .into_iter()
            .flatten()
            .collect()
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        [
            &mut self.treebank,
            &mut self.train,
            &mut self.dev,
            &mut self.test,
            &mut self.embeddings,
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

/// Declarative description of one experiment (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub model: ModelKind,
    /// Name under which internal runs are stored.
    #[serde(default = "default_model_name")]
    pub model_name: String,
    #[serde(default)]
    pub punct: PunctPolicy,
    #[serde(default = "default_true")]
    pub single_root: bool,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_grid_budget")]
    pub grid_budget: f64,
    #[serde(default = "default_split_ratios")]
    pub split_ratios: (f64, f64, f64),
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_mattr_window")]
    pub mattr_window: usize,
    /// Score files (language,model,metric,mean,sd) merged into the store.
    #[serde(default)]
    pub external_scores: Vec<PathBuf>,
    #[serde(default)]
    pub save_checkpoints: bool,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default, rename = "language")]
    pub languages: Vec<LanguageConfig>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}
fn default_model_name() -> String {
    "biaffine-lstm".into()
}
fn default_true() -> bool {
    true
}
fn default_one() -> u64 {
    1
}
fn default_grid_budget() -> f64 {
    0.25
}
fn default_split_ratios() -> (f64, f64, f64) {
    (0.8, 0.1, 0.1)
}
fn default_mattr_window() -> usize {
    500
}
fn default_synthetic_sentences() -> usize {
    200
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    /// Parses and validates; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.out_dir);
        self.external_scores.iter_mut().for_each(resolve);
        for lang in &mut self.languages {
            lang.paths_mut().into_iter().for_each(resolve);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return config_err("seeds must not be empty");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return config_err("seeds must be distinct");
        }
        if self.languages.is_empty() {
            return config_err("no [[language]] entries");
        }
        let mut codes = BTreeSet::new();
        for lang in &self.languages {
            if !codes.insert(&lang.code) {
                return config_err(format!("language {:?} listed twice", lang.code));
            }
            let sources = [lang.treebank.is_some(), lang.train.is_some(), lang.synthetic.is_some()]
                .iter()
                .filter(|&&b| b)
                .count();
            if sources > 1 {
                return config_err(format!(
                    "language {}: give one of treebank, train/dev, or synthetic",
                    lang.code
                ));
            }
            if lang.train.is_some() != lang.dev.is_some() {
                return config_err(format!("language {}: train and dev go together", lang.code));
            }
            if lang.test.is_some() && lang.train.is_none() {
                return config_err(format!("language {}: test given without train/dev", lang.code));
            }
            if self.model == ModelKind::Internal && sources == 0 {
                return config_err(format!("language {} has no treebank", lang.code));
            }
            if lang.embeddings.is_some() && lang.embedding_dim.is_none() {
                return config_err(format!("language {}: embeddings need embedding_dim", lang.code));
            }
            if let Some(c) = lang.train_count {
                if !(c >= 1.0 && c.is_finite()) {
                    return config_err(format!("language {}: train_count must be >= 1", lang.code));
                }
            }
            for path in lang.paths() {
                if !path.exists() {
                    return config_err(format!(
                        "language {}: path {} does not exist",
                        lang.code,
                        path.display()
                    ));
                }
            }
        }
        for path in &self.external_scores {
            if !path.exists() {
                return config_err(format!("score file {} does not exist", path.display()));
            }
        }
        if self.model == ModelKind::External && self.external_scores.is_empty() {
            return config_err("model = \"external\" needs external_scores");
        }
        if let Some(grid) = &self.grid {
            if grid.is_empty() {
                return config_err("grid has an empty axis");
            }
        }
        if !(self.grid_budget > 0.0 && self.grid_budget <= 1.0) {
            return config_err("grid_budget must lie in (0, 1]");
        }
        if self.mattr_window == 0 {
            return config_err("mattr_window must be positive");
        }
        self.hyperparams
            .validate()
            .map_err(|e| Error::Config(format!("hyperparams: {e}")))
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            punct: self.punct,
            single_root: self.single_root,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization (paths as resolved).
    pub fn hash(&self) -> Result<String> {
        Ok(format!("{:x}", Sha256::digest(self.to_toml()?.as_bytes())))
    }
}
