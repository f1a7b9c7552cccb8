use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, LanguageConfig, ModelKind};
use super::report::emit_report;
use super::store::{ingest_external_scores, LanguageInfo, ResultsStore, RunFailure};
use crate::error::{Error, Result};
use crate::lexicon::{build_vocab, load_embeddings, EmbeddingTable, Vocabulary};
use crate::metrics::treebank_mattr;
use crate::parser::{embedding_fingerprint, grid_search, train_with, Checkpoint, GridOutcome, Hyperparams, RunResult};
use crate::synthetic::{grammar_embeddings, grammar_treebank};
use crate::treebank::{parse_conllu, split_treebank, subsample, write_conllu, DepSentence, TreebankSplit};

/// A language's data, ready for training.
pub struct PreparedLanguage {
    pub code: String,
    pub split: TreebankSplit,
    pub vocab: Vocabulary,
    pub table: Option<EmbeddingTable>,
    /// SHA-256 of the CoNLL-U text of each split, plus the embedding table.
    pub checksums: BTreeMap<String, String>,
}

fn read_treebank(path: &Path, language: &str) -> Result<Vec<DepSentence>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    parse_conllu(&text, language)
}

fn sha(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

pub fn prepare_language(
    config: &ExperimentConfig,
    lang: &LanguageConfig,
    hp: &Hyperparams,
) -> Result<PreparedLanguage> {
    let code = &lang.code;
    let mut split = if let Some(path) = &lang.treebank {
        split_treebank(&read_treebank(path, code)?, config.split_ratios, config.split_seed)?
    } else if let (Some(train), Some(dev)) = (&lang.train, &lang.dev) {
        TreebankSplit {
            train: read_treebank(train, code)?,
            dev: read_treebank(dev, code)?,
            test: match &lang.test {
                Some(p) => read_treebank(p, code)?,
                None => Vec::new(),
            },
        }
    } else if let Some(syn) = &lang.synthetic {
        split_treebank(&grammar_treebank(syn.sentences, syn.seed, code), config.split_ratios, config.split_seed)?
    } else {
        return Err(Error::Config(format!("language {code} has no treebank")));
    };
    if let Some(n) = lang.train_sentences {
        if n < split.train.len() {
            split.train = subsample(&split.train, n, config.split_seed)?;
        }
    }
    let table = match (&lang.embeddings, lang.embedding_dim, &lang.synthetic) {
        (Some(path), Some(dim), _) => Some(load_embeddings(&fs::read_to_string(path)?, dim)?),
        (None, _, Some(syn)) => match syn.embedding_dim {
            Some(dim) => Some(grammar_embeddings(dim, syn.seed)?),
            None => None,
        },
        _ => None,
    };
    let mut checksums = BTreeMap::new();
    checksums.insert("train".to_string(), sha(&write_conllu(&split.train)));
    checksums.insert("dev".to_string(), sha(&write_conllu(&split.dev)));
    checksums.insert("test".to_string(), sha(&write_conllu(&split.test)));
    if let Some(t) = &table {
        checksums.insert("embeddings".to_string(), embedding_fingerprint(t));
    }
    Ok(PreparedLanguage {
        code: code.clone(),
        vocab: build_vocab(&split.train, hp.min_frequency),
        split,
        table,
        checksums,
    })
}

/// Everything recorded about one (language, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub language: String,
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub data_checksums: BTreeMap<String, String>,
    pub hyperparams: Hyperparams,
    pub result: Option<RunResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub store: ResultsStore,
    pub manifests: Vec<RunManifest>,
    pub grids: BTreeMap<String, GridOutcome>,
}

fn language_info(
    config: &ExperimentConfig,
    lang: &LanguageConfig,
    prepared: Option<&PreparedLanguage>,
) -> Result<Option<LanguageInfo>> {
    let computed = match prepared {
        Some(p) => Some((
            p.split.train.len() as f64,
            treebank_mattr(&p.code, &p.split.train, config.mattr_window)?,
        )),
        None => None,
    };
    let train_sentences = lang.train_count.or(computed.as_ref().map(|c| c.0));
    let Some(train_sentences) = train_sentences else {
        return Ok(None);
    };
    Ok(Some(LanguageInfo {
        language: lang.code.clone(),
        train_sentences,
        mattr: lang.mattr.or(computed.as_ref().map(|c| c.1.value)),
        train_tokens: computed.map(|c| c.1.token_count),
    }))
}

/// Training size and MATTR for every configured language, from its data
/// where present and from the config's overrides otherwise.
pub fn collect_language_info(config: &ExperimentConfig) -> Result<Vec<LanguageInfo>> {
    let mut out = Vec::new();
    for lang in &config.languages {
        let prepared = if lang.has_data() {
            Some(prepare_language(config, lang, &config.hyperparams)?)
        } else {
            None
        };
        out.extend(language_info(config, lang, prepared.as_ref())?);
    }
    Ok(out)
}

/// Grid search for one language, with the configured fixed seed.
pub fn search_language(config: &ExperimentConfig, prepared: &PreparedLanguage) -> Result<Option<GridOutcome>> {
    match &config.grid {
        None => Ok(None),
        Some(grid) => grid_search(
            &config.hyperparams,
            grid,
            &prepared.split,
            &prepared.vocab,
            prepared.table.as_ref(),
            config.grid_budget,
            config.eval_options(),
        )
        .map(Some),
    }
}

/// Runs every language x seed (in parallel), ingests external scores,
/// and writes the store, manifests, and report under `config.out_dir`.
/// A failed run is recorded and the batch continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let config_hash = config.hash()?;
    let mut store = ResultsStore::default();
    let mut manifests = Vec::new();
    let mut grids = BTreeMap::new();

    let prepared: Vec<(&LanguageConfig, Result<PreparedLanguage>)> = config
        .languages
        .iter()
        .map(|lang| {
            let p = if lang.has_data() {
                prepare_language(config, lang, &config.hyperparams)
            } else {
                Err(Error::Config(format!("language {} has no treebank", lang.code)))
            };
            (lang, p)
        })
        .collect();

    for (lang, p) in &prepared {
        if let Some(info) = language_info(config, lang, p.as_ref().ok())? {
            store.set_language(info);
        }
    }

    if config.model == ModelKind::Internal {
        let mut jobs = Vec::new();
        for (lang, p) in &prepared {
            let hp = p.as_ref().map_err(clone_error).and_then(|p| search_language(config, p));
            match (p, hp) {
                (Ok(p), Ok(outcome)) => {
                    let hp = match outcome {
                        Some(outcome) => {
                            let best = outcome.best.clone();
                            grids.insert(lang.code.clone(), outcome);
                            best
                        }
                        None => config.hyperparams.clone(),
                    };
                    jobs.extend(config.seeds.iter().map(|&seed| (p, hp.clone(), seed)));
                }
                (_, Err(e)) => {
                    for &seed in &config.seeds {
                        store.failures.push(RunFailure {
                            language: lang.code.clone(),
                            seed,
                            kind: e.kind().to_string(),
                            message: e.to_string(),
                        });
                    }
                }
                (Err(_), Ok(_)) => unreachable!("search runs only on prepared data"),
            }
        }
        let results: Vec<(RunManifest, Option<Checkpoint>)> = jobs
            .into_par_iter()
            .map(|(p, hp, seed)| run_one(config, &config_hash, p, hp, seed))
            .collect();
        for (manifest, _) in &results {
            match (&manifest.result, &manifest.error) {
                (Some(r), _) => store.add_run(&manifest.language, &manifest.model, manifest.seed, r.uas, r.las),
                (None, Some(e)) => store.failures.push(RunFailure {
                    language: manifest.language.clone(),
                    seed: manifest.seed,
                    kind: e.split(':').next().unwrap_or("error").to_string(),
                    message: e.clone(),
                }),
                (None, None) => unreachable!("a run either succeeds or fails"),
            }
        }
        if config.save_checkpoints {
            let dir = config.out_dir.join("checkpoints");
            fs::create_dir_all(&dir)?;
            for (manifest, ck) in &results {
                if let Some(ck) = ck {
                    ck.save(&dir.join(format!("{}_seed{}.ckpt", manifest.language, manifest.seed)))?;
                }
            }
        }
        manifests = results.into_iter().map(|(m, _)| m).collect();
    }

    for path in &config.external_scores {
        let rows = ingest_external_scores(&fs::read_to_string(path)?)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        store.add_external(rows)?;
    }

    let outcome = ExperimentOutcome {
        store,
        manifests,
        grids,
    };
    write_outcome(config, &outcome)?;
    Ok(outcome)
}

/// Errors are not `Clone`; keep the kind of the ones a run can report.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line: *line,
            message: message.clone(),
        },
        Error::Config(m) => Error::Config(m.clone()),
        Error::Embedding(m) => Error::Embedding(m.clone()),
        other => Error::InvalidInput(other.to_string()),
    }
}

fn run_one(
    config: &ExperimentConfig,
    config_hash: &str,
    p: &PreparedLanguage,
    hp: Hyperparams,
    seed: u64,
) -> (RunManifest, Option<Checkpoint>) {
    let hp = Hyperparams { seed, ..hp };
    let mut manifest = RunManifest {
        experiment: config.name.clone(),
        language: p.code.clone(),
        model: config.model_name.clone(),
        seed,
        config_hash: config_hash.to_string(),
        data_checksums: p.checksums.clone(),
        hyperparams: hp.clone(),
        result: None,
        error: None,
    };
    match train_with(&hp, &p.split, &p.vocab, p.table.as_ref(), config.eval_options()) {
        Ok((params, result)) => {
            manifest.result = Some(result);
            let ck = config
                .save_checkpoints
                .then(|| Checkpoint::new(hp, params, p.vocab.clone(), p.table.as_ref()));
            (manifest, ck)
        }
        Err(e) => {
            manifest.error = Some(format!("{}: {e}", e.kind()));
            (manifest, None)
        }
    }
}

/// Writes store CSVs, manifests, grid results, and the report bundle.
pub fn write_outcome(config: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    let out = &config.out_dir;
    outcome.store.save(out)?;
    if !outcome.manifests.is_empty() {
        let dir = out.join("manifests");
        fs::create_dir_all(&dir)?;
        for m in &outcome.manifests {
            let json = serde_json::to_string_pretty(m).expect("manifest serializes");
            fs::write(dir.join(format!("{}_seed{}.json", m.language, m.seed)), json + "\n")?;
        }
    }
    if !outcome.grids.is_empty() {
        let json = serde_json::to_string_pretty(&outcome.grids).expect("grid serializes");
        fs::write(out.join("grid.json"), json + "\n")?;
    }
    emit_report(&outcome.store, &config.analysis)?.write(&out.join("report"))
}
