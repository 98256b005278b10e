//! Content similarity between a source and its rewrite.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plugin::{Identified, Plugin, PluginSource};

pub const CHRF_MAX_ORDER: usize = 6;
/// Recall weighs `beta^2` times as much as precision.
pub const CHRF_BETA: f64 = 2.0;

/// Scores (source, output) pairs.
pub trait PairScorer: Send + Sync {
    fn name(&self) -> String;

    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>>;
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    for g in chars.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Character n-gram F-score with whitespace removed. Precision and recall
/// are averaged over the orders `1..=max_order` that both sides reach.
/// Two empty strings score 1, one empty string scores 0.
pub fn chrf(reference: &str, hypothesis: &str, max_order: usize, beta: f64) -> f64 {
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let h: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
    match (r.is_empty(), h.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0usize);
    for n in 1..=max_order.min(r.len()).min(h.len()) {
        let rc = ngram_counts(&r, n);
        let hc = ngram_counts(&h, n);
        let matched: usize = hc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum();
        p_sum += matched as f64 / (h.len() - n + 1) as f64;
        r_sum += matched as f64 / (r.len() - n + 1) as f64;
        orders += 1;
    }
    let (p, rec) = (p_sum / orders as f64, r_sum / orders as f64);
    if p == 0.0 && rec == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    (1.0 + b2) * p * rec / (b2 * p + rec)
}

/// Default similarity: chrF with the source as reference.
#[derive(Debug, Clone, Copy)]
pub struct ChrF {
    pub max_order: usize,
    pub beta: f64,
}

impl Default for ChrF {
    fn default() -> Self {
        Self { max_order: CHRF_MAX_ORDER, beta: CHRF_BETA }
    }
}

impl PairScorer for ChrF {
    fn name(&self) -> String {
        format!("chrf{}:beta={}", self.max_order, self.beta)
    }

    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        Ok(pairs.par_iter().map(|(s, o)| chrf(s, o, self.max_order, self.beta)).collect())
    }
}

/// Same score for every pair.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPairScorer(pub f64);

impl PairScorer for ConstantPairScorer {
    fn name(&self) -> String {
        format!("const:{}", self.0)
    }

    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        Ok(vec![self.0; pairs.len()])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimRequest {
    pub id: usize,
    pub text: String,
    pub source: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResponse {
    pub id: usize,
    pub score: f64,
}

impl Identified for SimResponse {
    fn id(&self) -> usize {
        self.id
    }
}

/// `{id, text, source}` → `{id, score}`.
#[derive(Debug)]
pub struct ExternalSim {
    plugin: Plugin,
}

impl ExternalSim {
    pub fn new(source: PluginSource) -> Self {
        Self { plugin: Plugin::new(source) }
    }
}

impl PairScorer for ExternalSim {
    fn name(&self) -> String {
        self.plugin.name()
    }

    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        let requests: Vec<SimRequest> = pairs
            .iter()
            .enumerate()
            .map(|(id, (s, o))| SimRequest { id, text: o.clone(), source: s.clone() })
            .collect();
        self.plugin
            .exchange::<_, SimResponse>(&requests)?
            .into_iter()
            .map(|(line, r)| {
                if (0.0..=1.0).contains(&r.score) {
                    Ok(r.score)
                } else {
                    Err(Error::protocol(self.name(), Some(line), format!("score {} outside [0, 1]", r.score)))
                }
            })
            .collect()
    }
}
