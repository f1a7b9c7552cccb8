//! Graph-based biaffine BiLSTM parser: parameters, forward/backward passes,
//! training with early stopping, grid search, and checkpoints.

mod checkpoint;
mod model;
mod params;
mod train;

pub use checkpoint::{embedding_fingerprint, Checkpoint, CHECKPOINT_VERSION};
pub use model::{
    batch_loss, biaffine_arc_scores, encode, encode_features, featurize, loss_and_gradients,
    score_arcs, score_labels, Dropout, SentenceFeatures,
};
pub use params::{Hyperparams, Inventory, LstmDirection, LstmLayer, ParserParams};
pub use train::{
    grid_search, inventory, parse, parse_features, train, train_with, EvalOptions, GridOutcome,
    GridRun, GridSpec, RunResult,
};

pub use crate::decoder::ArcScoreMatrix;
