//! The trace-embedding network: statement and state encoders, attention
//! fusion, flow encoder, max-pooled program embedding and a softmax head.
//!
//! ```text
//! statement tokens --RNN1--> h_stmt ┐
//! state values     --RNN2--> h_s1.. ┴ a1 attention -> h_ij --RNN3--> H^e_ij
//! max over paths of H^e_i  -> H_P  -> softmax(Z H_P)
//! ```

mod config;
mod model;
mod rnn;
mod train;
mod vocab;

pub use config::{Ablation, ModelConfig};
pub use model::{argmax, config_hash, pool_program, EncodedProgram, EncodedStep, Encoder, EncoderOutput, Fused, Liger, StepWeights};
pub use rnn::{encode_sequences, CellKind, Rnn};
pub use train::{accuracy_and_macro_f1, evaluate, fit, predict_all, train_classifier, write_metrics_csv, EpochMetrics, LabeledProgram, TrainConfig};
pub use vocab::{Vocab, BEGIN, BOTTOM, END, PAD, UNK, UNK_VALUE, VALUE_CLAMP};

use crate::numcore::NumError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
}

#[cfg(test)]
mod tests;
