pub mod corpus;
pub mod edit;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod io;
pub mod pipeline;
pub mod plugin;
pub mod scoring;
pub mod synth;
pub mod tagger;
pub mod text;
pub mod toxicity;

pub use error::{Error, Result};
