//! Toxicity classification: a trainable character n-gram model, a
//! behavioral checklist, and held-out evaluation.

pub mod checklist;
pub mod classifier;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledText;
use crate::error::{Error, Result};
use crate::scoring::Scorer;

pub use checklist::{
    augment_corpus, predicted_label, run_checklist, ChecklistReport, ChecklistTest, TestKind, TestResult,
    ToxicLexicon, THRESHOLD,
};
pub use classifier::{ClfModel, ClfOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClfReport {
    pub samples: usize,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub f1: f64,
}

/// ROC AUC via average ranks; ties count one half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| positive[k]).count() as f64 * avg;
        i = j + 1;
    }
    let (pos, neg) = (pos as f64, neg as f64);
    Some((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Scores a labeled set; F1 is for the toxic class.
pub fn evaluate_clf(scorer: &dyn Scorer, data: &[LabeledText]) -> Result<ClfReport> {
    if data.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty set".into()));
    }
    let texts: Vec<String> = data.iter().map(|t| t.text.clone()).collect();
    let scores = scorer.score_batch(&texts)?;
    let gold: Vec<bool> = data.iter().map(|t| t.label.is_toxic()).collect();
    let (mut tp, mut fp, mut fneg, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &g) in scores.iter().zip(&gold) {
        let p = predicted_label(s).is_toxic();
        correct += usize::from(p == g);
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64 };
    Ok(ClfReport {
        samples: data.len(),
        auc: roc_auc(&scores, &gold),
        accuracy: correct as f64 / data.len() as f64,
        f1,
    })
}
