//! Word sense disambiguation with a single bidirectional LSTM shared
//! across all ambiguous words.

pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod model;
pub mod numkit;
pub mod train;

pub use error::{Error, Result};
