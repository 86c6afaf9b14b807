//! The neural type classifier.
//!
//! Four submodels feed one softmax over the type vocabulary: bidirectional
//! recurrent encoders over the identifier sequence, the usage/return token
//! sequences, and the comment words, plus the type-mask vector passed
//! through as-is. Argument and return slots get two independently trained
//! instances of the same architecture.
//!
//! Everything is `f64` and single-threaded during training, so a fixed
//! seed reproduces parameters bit for bit.

mod checkpoint;
mod classifier;
mod inputs;
mod lstm;
mod train;

pub use checkpoint::{load_models, save_models, TwinModels};
pub use classifier::{
    backward_batch, forward, forward_batch, predict_topk, rank_types, ForwardCache, Gradients,
    ModelParameters,
};
pub use inputs::{build_inputs, render_for_embedding, training_pairs, SlotChannel, BUILTIN_MASK_TYPES};
pub use train::{train_model, TrainReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Ablation, Hyperparams};
use crate::extract::SlotId;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for vocabulary of {vocab}")]
    LabelOutOfRange { label: usize, vocab: usize },
    #[error("empty training set")]
    EmptyDataset,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} is not a model checkpoint: {reason}")]
    Format { path: String, reason: String },
    #[error("model was trained against a different type vocabulary")]
    VocabularyHashMismatch,
}

/// Architecture and input-shape description; stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub hidden: usize,
    pub code_dim: usize,
    pub word_dim: usize,
    pub id_len: usize,
    pub token_len: usize,
    pub max_windows: usize,
    pub comment_len: usize,
    pub vocab_size: usize,
    pub ablation: Ablation,
}

impl ModelHyper {
    pub fn from_config(hp: &Hyperparams, vocab_size: usize, code_dim: usize, word_dim: usize) -> Self {
        ModelHyper {
            hidden: hp.hidden,
            code_dim,
            word_dim,
            id_len: hp.id_len,
            token_len: hp.token_len,
            max_windows: hp.max_windows,
            comment_len: hp.comment_len,
            vocab_size,
            ablation: hp.ablation,
        }
    }

    pub fn token_total(&self) -> usize {
        self.max_windows * self.token_len
    }

    /// Concatenated feature width: three bidirectional encoders plus the
    /// type mask.
    pub fn concat_dim(&self) -> usize {
        3 * (2 * self.hidden) + self.vocab_size
    }
}

/// One slot's encoded features. Sequences hold embedding-table indices at
/// exactly the configured lengths; `0` is the padding index.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub id_seq: Vec<usize>,
    pub token_seq: Vec<usize>,
    pub comment_seq: Vec<usize>,
    /// One entry per vocabulary type; 1.0 when the type is built-in or
    /// available in the file.
    pub type_mask: Vec<f64>,
}

/// Ranked, thresholded, `unknown`-free predictions for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub file: String,
    pub slot: SlotId,
    /// (type name, probability), descending.
    pub ranked: Vec<(String, f64)>,
    /// The full distribution's argmax was `unknown`, so no suggestion is
    /// made for this slot.
    pub contains_unknown_top1: bool,
}
