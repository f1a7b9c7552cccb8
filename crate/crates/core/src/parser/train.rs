use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{batch_loss, encode_features, featurize, score_arcs, score_labels, Dropout, SentenceFeatures};
use super::params::{Hyperparams, Inventory, ParserParams};
use crate::decoder::{assign_labels, chu_liu_edmonds};
use crate::error::{invalid, Error, Result};
use crate::lexicon::{EmbeddingTable, Vocabulary};
use crate::metrics::{evaluate, EvalScore, Prediction, PunctPolicy};
use crate::treebank::{DepSentence, TreebankSplit};

/// Evaluation settings shared by training and scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub punct: PunctPolicy,
    /// Restrict decoding to trees with exactly one root dependent.
    pub single_root: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            punct: PunctPolicy::Include,
            single_root: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub language: String,
    /// Held-out scores of the best-dev parameters (test split, or dev when
    /// the test split is empty).
    pub uas: f64,
    pub las: f64,
    pub best_epoch: usize,
    pub dev_las: f64,
    pub epochs_run: usize,
    /// Dev LAS after each epoch.
    pub dev_history: Vec<f64>,
}

pub fn inventory(vocab: &Vocabulary, table: Option<&EmbeddingTable>) -> Inventory {
    Inventory {
        words: vocab.word_index.len(),
        chars: vocab.char_index.len(),
        tags: vocab.pos_index.len(),
        labels: vocab.num_labels(),
        static_dim: table.map_or(0, EmbeddingTable::dim),
    }
}

pub fn parse_features(
    feats: &SentenceFeatures,
    params: &ParserParams,
    vocab: &Vocabulary,
    single_root: bool,
) -> Result<Prediction> {
    if feats.is_empty() {
        return invalid("cannot parse an empty sentence");
    }
    let contexts = encode_features(params, feats);
    let heads = chu_liu_edmonds(&score_arcs(&contexts, params)?, single_root)?;
    let deprels = if vocab.num_labels() == 0 {
        vec!["_".to_string(); heads.len()]
    } else {
        assign_labels(&score_labels(&contexts, params, &heads)?, &heads)?
            .into_iter()
            .map(|l| vocab.label_index.name(l).to_string())
            .collect()
    };
    Ok(Prediction { heads, deprels })
}

pub fn parse(
    sentence: &DepSentence,
    params: &ParserParams,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
    single_root: bool,
) -> Result<Prediction> {
    parse_features(&featurize(sentence, vocab, table), params, vocab, single_root)
}

fn score_split(
    gold: &[DepSentence],
    feats: &[SentenceFeatures],
    params: &ParserParams,
    vocab: &Vocabulary,
    options: EvalOptions,
) -> Result<EvalScore> {
    let predicted = feats
        .iter()
        .map(|f| parse_features(f, params, vocab, options.single_root))
        .collect::<Result<Vec<_>>>()?;
    evaluate(gold, &predicted, options.punct)
}

/// Batches of sentence indices, bucketed by length.
fn buckets(feats: &[SentenceFeatures], batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..feats.len()).collect();
    order.sort_by_key(|&i| (feats[i].len(), i));
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// [`train_with`] under default evaluation options.
pub fn train(
    hp: &Hyperparams,
    split: &TreebankSplit,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
) -> Result<(ParserParams, RunResult)> {
    train_with(hp, split, vocab, table, EvalOptions::default())
}

/// Gradient descent with exponential step decay and early stopping on dev
/// LAS. Returns the best-dev parameters.
pub fn train_with(
    hp: &Hyperparams,
    split: &TreebankSplit,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
    options: EvalOptions,
) -> Result<(ParserParams, RunResult)> {
    hp.validate()?;
    if split.train.is_empty() || split.dev.is_empty() {
        return invalid("training needs non-empty train and dev splits");
    }
    if let Some(s) = split.train.iter().chain(&split.dev).find(|s| s.is_empty()) {
        return invalid(format!("empty sentence {:?} in training data", s.sent_id));
    }
    let language = split.train[0].language.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut params = ParserParams::init(hp, &inventory(vocab, table), &mut rng);

    let train_feats: Vec<_> = split.train.iter().map(|s| featurize(s, vocab, table)).collect();
    let dev_feats: Vec<_> = split.dev.iter().map(|s| featurize(s, vocab, table)).collect();
    let mut batches = buckets(&train_feats, hp.batch_size);

    let mut best = params.clone();
    let mut best_las = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut step = 0;
    let mut history = Vec::new();
    for epoch in 1..=hp.max_epochs {
        batches.shuffle(&mut rng);
        for batch in &batches {
            let members: Vec<SentenceFeatures> =
                batch.iter().map(|&i| train_feats[i].clone()).collect();
            let mut dropout = Dropout {
                rng: &mut rng,
                input: hp.input_dropout,
                hidden: hp.hidden_dropout,
            };
            let (loss, mut grads) = batch_loss(&params, &members, Some(&mut dropout))
                .map_err(|e| match e {
                    Error::Divergence(m) => {
                        Error::Divergence(format!("epoch {epoch}, step {step}: {m}"))
                    }
                    other => other,
                })?;
            if let Some(limit) = hp.clip_norm {
                let norm = grads.norm();
                if norm > limit {
                    grads.scale(limit / norm);
                }
            }
            params.add_scaled(&grads, -hp.step_size(step));
            step += 1;
            if !params.all_finite() {
                return Err(Error::Divergence(format!(
                    "epoch {epoch}, step {step}: non-finite parameters (loss {loss})"
                )));
            }
        }
        let dev = score_split(&split.dev, &dev_feats, &params, vocab, options)?;
        history.push(dev.las);
        if dev.las > best_las {
            best_las = dev.las;
            best_epoch = epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale > hp.patience {
                break;
            }
        }
    }

    let held_out = if split.test.is_empty() { &split.dev } else { &split.test };
    let held_feats: Vec<_> = held_out.iter().map(|s| featurize(s, vocab, table)).collect();
    let score = score_split(held_out, &held_feats, &best, vocab, options)?;
    let result = RunResult {
        seed: hp.seed,
        language,
        uas: score.uas,
        las: score.las,
        best_epoch,
        dev_las: if best_epoch == 0 { 0.0 } else { best_las },
        epochs_run: history.len(),
        dev_history: history,
    };
    Ok((best, result))
}

/// Candidate values for the three optimizer settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rate: Vec<f64>,
    pub decay_rate: Vec<f64>,
    pub decay_steps: Vec<usize>,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.learning_rate.len() * self.decay_rate.len() * self.decay_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cartesian product in grid order (learning rate outermost).
    pub fn cells(&self, base: &Hyperparams) -> Vec<Hyperparams> {
        let mut out = Vec::with_capacity(self.len());
        for &learning_rate in &self.learning_rate {
            for &decay_rate in &self.decay_rate {
                for &decay_steps in &self.decay_steps {
                    out.push(Hyperparams {
                        learning_rate,
                        decay_rate,
                        decay_steps,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub hyperparams: Hyperparams,
    pub dev_las: f64,
    pub best_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    /// Winning cell with the full (unreduced) budget of the base settings.
    pub best: Hyperparams,
    /// One entry per trained cell, in grid order; empty for a single cell.
    pub runs: Vec<GridRun>,
}

/// Trains every cell once at a reduced budget and keeps the best dev LAS.
/// Ties go to the earliest cell.
pub fn grid_search(
    base: &Hyperparams,
    grid: &GridSpec,
    split: &TreebankSplit,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
    budget_fraction: f64,
    options: EvalOptions,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return invalid("grid search needs at least one value per setting");
    }
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return invalid(format!("budget fraction must lie in (0, 1], got {budget_fraction}"));
    }
    let cells = grid.cells(base);
    for cell in &cells {
        cell.validate()?;
    }
    if cells.len() == 1 {
        return Ok(GridOutcome {
            best: cells.into_iter().next().expect("one cell"),
            runs: Vec::new(),
        });
    }
    let runs = cells
        .par_iter()
        .map(|cell| {
            let max_epochs = ((cell.max_epochs as f64 * budget_fraction).ceil() as usize).max(1);
            let reduced = Hyperparams {
                max_epochs,
                patience: (cell.patience / 2).min(max_epochs),
                ..cell.clone()
            };
            let (_, run) = train_with(&reduced, split, vocab, table, options)?;
            Ok(GridRun {
                hyperparams: reduced,
                dev_las: run.dev_las,
                best_epoch: run.best_epoch,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut winner = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.dev_las > runs[winner].dev_las {
            winner = i;
        }
    }
    Ok(GridOutcome {
        best: cells[winner].clone(),
        runs,
    })
}
