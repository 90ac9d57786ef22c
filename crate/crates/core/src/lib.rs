//! Tokenizer training, compression measurement and per-language vocabulary
//! planning for comparing how evenly tokenizers compress parallel text.

pub mod bpe;
pub mod corpus;
pub mod curvefit;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod pretok;
pub mod stats;
pub mod superbpe;
pub mod synth;
pub mod unigram;

pub use error::{Error, Result};
