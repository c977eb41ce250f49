//! Translation-granularity preprocessing: character, hybrid word-character,
//! BPE and wordpiece segmentation, vocabulary construction, BLEU scoring and a
//! desk-scale attention encoder-decoder.

pub mod bpe;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod nmt;
pub mod segmenters;
pub mod vocab;
pub mod wpm;

pub use corpus::{Corpus, Sentence, SentencePair};
pub use error::{Error, Result};
pub use segmenters::{Decoded, Granularity, Segmenter};
pub use vocab::Vocabulary;
