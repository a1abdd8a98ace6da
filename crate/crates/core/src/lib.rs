//! Neural natural-language understanding for in-vehicle passenger commands:
//! slot filling, intent keyword extraction and utterance-level intent
//! recognition with hybrid, separate, joint and hierarchical recurrent
//! models, plus corpus tooling and a cross-validation harness.

pub mod error;
pub mod numerics;

pub use error::{NluError, Result};
pub mod corpus;
pub mod embeddings;
pub mod recurrent;
pub mod eval;
pub mod models;
pub mod persist;
