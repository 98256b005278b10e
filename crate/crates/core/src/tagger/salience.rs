use std::collections::HashMap;

use crate::corpus::{Label, LabeledText};
use crate::edit::{Tag, TagSequence};
use crate::error::{Error, Result};
use crate::text::{fold_key, tokenize_words};

pub const DEFAULT_THRESHOLD: f64 = 3.0;
pub const DEFAULT_SMOOTHING: f64 = 1.0;

/// Per-token occurrence counts in toxic and neutral text. Tokens are
/// counted under their folded (lowercase, `ё`→`е`) form.
#[derive(Debug, Clone)]
pub struct SalienceTable {
    toxic: HashMap<String, u64>,
    neutral: HashMap<String, u64>,
    smoothing: f64,
}

impl SalienceTable {
    pub fn new(smoothing: f64) -> Result<Self> {
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::Invalid(format!("smoothing must be positive, got {smoothing}")));
        }
        Ok(Self { toxic: HashMap::new(), neutral: HashMap::new(), smoothing })
    }

    pub fn from_corpus(corpus: &[LabeledText], smoothing: f64) -> Result<Self> {
        let mut table = Self::new(smoothing)?;
        for item in corpus {
            for token in tokenize_words(&item.text) {
                table.add(&token, item.label, 1);
            }
        }
        Ok(table)
    }

    pub fn add(&mut self, token: &str, label: Label, count: u64) {
        let side = match label {
            Label::Toxic => &mut self.toxic,
            Label::Neutral => &mut self.neutral,
        };
        *side.entry(fold_key(token)).or_default() += count;
    }

    pub fn counts(&self, token: &str) -> (u64, u64) {
        let key = fold_key(token);
        (
            self.toxic.get(&key).copied().unwrap_or(0),
            self.neutral.get(&key).copied().unwrap_or(0),
        )
    }

    /// `(toxic + λ) / (neutral + λ)`.
    pub fn salience(&self, token: &str) -> f64 {
        let (t, n) = self.counts(token);
        (t as f64 + self.smoothing) / (n as f64 + self.smoothing)
    }
}

/// Deletes every token whose salience exceeds the threshold.
#[derive(Debug, Clone)]
pub struct SalienceTagger {
    pub table: SalienceTable,
    pub threshold: f64,
}

impl SalienceTagger {
    pub fn new(table: SalienceTable, threshold: f64) -> Self {
        Self { table, threshold }
    }

    pub fn predict(&self, tokens: &[String]) -> TagSequence {
        let token_tags = tokens
            .iter()
            .map(|t| if self.table.salience(t) > self.threshold { Tag::Delete } else { Tag::Keep })
            .collect();
        TagSequence { token_tags, gap_insert: vec![false; tokens.len() + 1] }
    }
}
