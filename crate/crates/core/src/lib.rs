//! Causal alignment, fine-tuning data and streaming inference for
//! simultaneous translation with a WAIT token.

pub mod aligner;
pub mod backends;
pub mod causal;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod prompt;
pub mod sft;
pub mod stream;
pub mod synthetic;
pub mod tokenizer;

pub use error::{Error, Result};
