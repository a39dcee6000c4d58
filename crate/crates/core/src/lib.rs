//! Adverse drug reaction (ADR) mining for tweets.
//!
//! The crate covers the full pipeline: loading tweet corpora, normalizing
//! tweet text with a character offset map, byte-pair subword tokenization,
//! a small transformer encoder with three task heads (ADR tweet detection,
//! BIO mention tagging, MedDRA concept classification), training with
//! AdamW and a multi-task objective, and strict/relaxed span scoring.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod preprocess;
pub mod spans;
pub mod synthetic;
pub mod tokenize;
pub mod train;
mod tsv;

pub use error::{Error, Result};
