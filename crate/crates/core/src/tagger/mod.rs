//! First pipeline step: predicting coarse edit tags for a toxic sentence.

mod external;
mod perceptron;
mod salience;

pub use external::{ExternalTagger, TagRequest, TagResponse};
pub use perceptron::{PerceptronModel, TrainOptions};
pub use salience::{SalienceTable, SalienceTagger, DEFAULT_SMOOTHING, DEFAULT_THRESHOLD};

use rayon::prelude::*;

use crate::edit::TagSequence;
use crate::error::Result;

/// Anything that turns token sequences into tag sequences.
///
/// Implementations must return exactly one [`TagSequence`] per sentence with
/// one tag per token and one gap marker more than tokens.
pub trait Tagger: Send + Sync {
    fn name(&self) -> String;

    fn tag_batch(&self, sentences: &[Vec<String>]) -> Result<Vec<TagSequence>>;

    fn tag(&self, tokens: &[String]) -> Result<TagSequence> {
        let mut out = self.tag_batch(&[tokens.to_vec()])?;
        Ok(out.pop().expect("one result per sentence"))
    }
}

/// Tags every token KEEP; the identity tagger.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeepTagger;

impl Tagger for KeepTagger {
    fn name(&self) -> String {
        "keep".into()
    }

    fn tag_batch(&self, sentences: &[Vec<String>]) -> Result<Vec<TagSequence>> {
        Ok(sentences.iter().map(|s| TagSequence::all_keep(s.len())).collect())
    }
}

impl Tagger for SalienceTagger {
    fn name(&self) -> String {
        "salience".into()
    }

    fn tag_batch(&self, sentences: &[Vec<String>]) -> Result<Vec<TagSequence>> {
        Ok(sentences.par_iter().map(|s| self.predict(s)).collect())
    }
}

impl Tagger for PerceptronModel {
    fn name(&self) -> String {
        "perceptron".into()
    }

    fn tag_batch(&self, sentences: &[Vec<String>]) -> Result<Vec<TagSequence>> {
        Ok(sentences.par_iter().map(|s| self.predict(s)).collect())
    }
}
