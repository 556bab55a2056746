//! Skip-gram Speech2Vec at desk scale.
//!
//! A bidirectional LSTM encodes one spoken word (a sequence of 13-dim MFCC
//! frames) into an embedding. For every neighbor within the window, an
//! offset-specific LSTM decoder starts from that embedding and reconstructs
//! the neighbor's frames with teacher forcing, attending over the encoder
//! outputs. The loss is mean squared error over valid (unpadded) frames only.
//! A word's final embedding is the mean over all its occurrences.

pub mod corpus;
pub mod gradcheck;
mod lstm;
pub mod model;
pub mod params;
pub mod train;

use thiserror::Error;

pub use corpus::{
    make_synthetic_corpus, pad_or_truncate, MfccSequence, PaddedWord, SpokenCorpus, SpokenWord, SyntheticConfig,
    SyntheticCorpus,
};
pub use gradcheck::{grad_check, random_batch, GradCheckReport, DEFAULT_EPSILON};
pub use model::{batch_loss, encode, grad, skipgram_loss, LossReport};
pub use params::{ModelConfig, ModelParams, Pooling};
pub use train::{extract_word_embeddings, train, EpochMetrics, OptimizerKind, TrainConfig, TrainOutput};

/// Coefficients per MFCC frame.
pub const MFCC_DIM: usize = 13;

#[derive(Debug, Error)]
pub enum S2vError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("non-finite value: {0}")]
    Numerical(String),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Embed(#[from] crate::embed_store::EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
