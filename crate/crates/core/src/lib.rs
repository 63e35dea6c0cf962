//! Tokenization optimization as post-processing for frozen text classifiers.
//!
//! The pipeline trains a downstream tokenizer and classifier, harvests the
//! minimum-loss tokenization of every training sentence among N candidates,
//! and fits new tokenizers (a vocabulary-restricted span tokenizer plus two
//! baselines) to reproduce the harvested tokenizations.

pub mod autodiff;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod fsutil;
pub mod lattice;
pub mod metrics;
pub mod pipeline;
pub mod retok;
pub mod rng;
pub mod synth;
pub mod tokenizers;

pub use error::{Error, Result};
