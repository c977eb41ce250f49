//! Desk-scale attention encoder-decoder.
//!
//! A stacked LSTM encoder with a bidirectional bottom layer, a global
//! dot-product attention decoder with input feeding, log-likelihood training
//! and beam search.

pub mod checkpoint;
pub mod lstm;
pub mod model;
pub mod search;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use model::{DecoderStep, Dropout, EncoderStates, NmtConfig, NmtParams};
pub use search::{beam_search, greedy, Hypothesis};
pub use train::{perplexity, train, train_with_progress, EpochReport, Optimizer, Pair, Schedule, TrainReport};

/// Default beam width.
pub const DEFAULT_BEAM: usize = 12;
