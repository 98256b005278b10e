//! Text scorers returning values in `[0, 1]`: toxicity probabilities,
//! fluency, similarity. External scorers speak `{id, text}` → `{id, score}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plugin::{Identified, Plugin, PluginSource};

pub trait Scorer: Send + Sync {
    fn name(&self) -> String;

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>>;

    fn score(&self, text: &str) -> Result<f64> {
        Ok(self.score_batch(&[text.to_owned()])?[0])
    }
}

/// Returns the same score for every text.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl ConstantScorer {
    pub fn new(value: f64) -> Result<Self> {
        check_unit(value).map(Self).map_err(Error::Invalid)
    }
}

impl Scorer for ConstantScorer {
    fn name(&self) -> String {
        format!("const:{}", self.0)
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        Ok(vec![self.0; texts.len()])
    }
}

/// Adapts a closure into a scorer.
pub struct FnScorer<F>(pub F);

impl<F: Fn(&str) -> f64 + Send + Sync> Scorer for FnScorer<F> {
    fn name(&self) -> String {
        "fn".into()
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        Ok(texts.iter().map(|t| (self.0)(t)).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: usize,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: usize,
    pub score: f64,
}

impl Identified for ScoreResponse {
    fn id(&self) -> usize {
        self.id
    }
}

#[derive(Debug)]
pub struct ExternalScorer {
    plugin: Plugin,
}

impl ExternalScorer {
    pub fn new(source: PluginSource) -> Self {
        Self { plugin: Plugin::new(source) }
    }
}

impl Scorer for ExternalScorer {
    fn name(&self) -> String {
        self.plugin.name()
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        let requests: Vec<ScoreRequest> =
            texts.iter().enumerate().map(|(id, t)| ScoreRequest { id, text: t.clone() }).collect();
        self.plugin
            .exchange::<_, ScoreResponse>(&requests)?
            .into_iter()
            .map(|(line, r)| check_unit(r.score).map_err(|m| Error::protocol(self.name(), Some(line), m)))
            .collect()
    }
}

fn check_unit(v: f64) -> Result<f64, String> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("score {v} outside [0, 1]"))
    }
}
