//! BiLSTM + CRF sequence labeler, trained from scratch in f64.

pub mod crf;
pub mod io;
pub mod lstm;
pub mod model;
pub mod optim;
pub mod train;

pub use crf::{
    argmax_decode, crf_log_partition, crf_nll_and_grad, crf_viterbi, forward_backward,
    sequence_score, CrfLoss, CrfParams,
};
pub use io::{load_model, save_model, LabelerModel, ModelFileError, ModelHeader};
pub use lstm::{lstm_cell_backward, lstm_cell_forward, LstmWeights};
pub use model::{
    bilstm_forward, predict, sequence_loss_and_grad, stack_rows, EmissionMatrix, ModelConfig,
    ModelParams, Weights,
};
pub use optim::{rmsprop_step, OptState, RmsPropConfig};
pub use train::{
    line_accuracy, train, EpochRecord, Sequence, StopReason, TrainConfig, TrainOutcome, TrainingLog,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqlabError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("label {label} at position {position} is outside 0..{k}")]
    LabelOutOfRange { position: usize, label: usize, k: usize },
    #[error("input dimension {found}, model expects {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite parameter")]
    NonFinite,
}
