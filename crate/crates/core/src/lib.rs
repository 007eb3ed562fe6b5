//! Open-vocabulary language modelling for source code.

pub mod bpe;
pub mod corpus;
pub mod dataset;
pub mod decoder;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod ngram;
pub mod synth;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
