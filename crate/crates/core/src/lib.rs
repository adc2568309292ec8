pub mod analysis;
pub mod cli;
pub mod cnn;
pub mod config;
pub mod crowd;
pub mod dataset;
pub mod distill;
pub mod embeddings;
pub mod error;
pub mod experiment;
pub mod rules;
pub mod sst;
pub mod stats;

pub use error::{Error, Result};
