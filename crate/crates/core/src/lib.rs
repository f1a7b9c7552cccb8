//! Dependency-parsing experiment lab.
//!
//! Trains and evaluates a graph-based biaffine BiLSTM parser on CoNLL-U
//! treebanks and runs the resource-scaling analysis on top of the scores:
//! relative error rates, MATTR covariates, random-intercept mixed models,
//! likelihood-ratio tests, Spearman correlations, and crossover estimates.

pub mod decoder;
pub mod error;
pub mod harness;
pub mod lexicon;
pub mod metrics;
pub mod parser;
pub mod scaling;
pub mod synthetic;
pub mod treebank;

pub use error::{Error, Result};
