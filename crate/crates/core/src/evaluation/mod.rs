//! Style transfer metrics: style accuracy (STA), content similarity (SIM),
//! fluency (FL) and their per-sample product (J).

pub mod agreement;
pub mod fluency;
pub mod similarity;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::Scorer;

pub use agreement::{
    agreement_report, krippendorff_alpha, load_annotations, majority_vote, pairwise_agreement, parse_annotations,
    AgreementReport, Alpha, AnnotationRecord,
};
pub use fluency::CharLm;
pub use similarity::{chrf, ChrF, ConstantPairScorer, ExternalSim, PairScorer};

/// One evaluated rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRow {
    pub source: String,
    pub output: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<String>,
}

/// Parses `source \t output [\t reference...]`.
pub fn parse_eval_rows(origin: &str, text: &str, skip_header: bool) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if skip_header && idx == 0 {
            continue;
        }
        let mut cols = line.trim_end_matches('\r').split('\t');
        let (Some(source), Some(output)) = (cols.next(), cols.next()) else {
            return Err(Error::schema(origin, idx + 1, "expected `source<TAB>output`"));
        };
        rows.push(EvalRow {
            source: source.to_owned(),
            output: output.to_owned(),
            references: cols.filter(|c| !c.is_empty()).map(str::to_owned).collect(),
        });
    }
    Ok(rows)
}

pub fn load_eval_rows(path: &Path, skip_header: bool) -> Result<Vec<EvalRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_eval_rows(&path.display().to_string(), &text, skip_header)
}

/// `1 - p(toxic)` per output.
pub fn sta(outputs: &[String], classifier: &dyn Scorer) -> Result<Vec<f64>> {
    Ok(classifier.score_batch(outputs)?.into_iter().map(|p| 1.0 - p).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub sta: Vec<f64>,
    pub sim: Vec<f64>,
    pub fl: Vec<f64>,
    pub mean_sta: f64,
    pub mean_sim: f64,
    pub mean_fl: f64,
    /// Mean of the per-sample product `sta * sim * fl`.
    pub j: f64,
}

/// Order-independent mean: values are summed in sorted order so that any
/// permutation of the input gives the same bits.
fn mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn joint(sta: Vec<f64>, sim: Vec<f64>, fl: Vec<f64>) -> Result<MetricsReport> {
    if sta.is_empty() {
        return Err(Error::Invalid("no samples to aggregate".into()));
    }
    if sta.len() != sim.len() || sta.len() != fl.len() {
        return Err(Error::Invalid(format!(
            "metric vectors differ in length: sta {}, sim {}, fl {}",
            sta.len(),
            sim.len(),
            fl.len()
        )));
    }
    if let Some(v) = sta.iter().chain(&sim).chain(&fl).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Invalid(format!("metric value {v} outside [0, 1]")));
    }
    let products: Vec<f64> = sta.iter().zip(&sim).zip(&fl).map(|((a, b), c)| a * b * c).collect();
    Ok(MetricsReport {
        samples: sta.len(),
        mean_sta: mean(&sta),
        mean_sim: mean(&sim),
        mean_fl: mean(&fl),
        j: mean(&products),
        sta,
        sim,
        fl,
    })
}

/// Scores every row with the three metric models.
pub fn evaluate(
    rows: &[EvalRow],
    classifier: &dyn Scorer,
    similarity: &dyn PairScorer,
    fluency: &dyn Scorer,
) -> Result<MetricsReport> {
    let outputs: Vec<String> = rows.iter().map(|r| r.output.clone()).collect();
    let pairs: Vec<(String, String)> = rows.iter().map(|r| (r.source.clone(), r.output.clone())).collect();
    joint(sta(&outputs, classifier)?, similarity.score_pairs(&pairs)?, fluency.score_batch(&outputs)?)
}
