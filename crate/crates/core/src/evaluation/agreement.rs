//! Aggregation of crowd annotations: majority vote and inter-annotator
//! agreement.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sample: String,
    pub worker: String,
    pub answer: u8,
}

impl AnnotationRecord {
    pub fn new(sample: impl Into<String>, worker: impl Into<String>, answer: u8) -> Self {
        Self { sample: sample.into(), worker: worker.into(), answer }
    }
}

/// Parses `sample_id \t worker_id \t answer`. A first line starting with
/// `sample_id` is treated as a header. Answers must be 0 or 1 and every
/// (sample, worker) pair may appear once.
pub fn parse_annotations(origin: &str, text: &str) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if idx == 0 && line.starts_with("sample_id") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [sample, worker, answer] = cols[..] else {
            return Err(Error::schema(origin, idx + 1, "expected `sample_id<TAB>worker_id<TAB>answer`"));
        };
        let answer = match answer.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::schema(origin, idx + 1, format!("answer {other:?} is not 0 or 1"))),
        };
        if !seen.insert((sample.to_owned(), worker.to_owned())) {
            return Err(Error::schema(origin, idx + 1, format!("duplicate answer by {worker:?} on {sample:?}")));
        }
        out.push(AnnotationRecord::new(sample, worker, answer));
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&path.display().to_string(), &text)
}

fn by_sample(records: &[AnnotationRecord]) -> BTreeMap<&str, Vec<u8>> {
    let mut units: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
    for r in records {
        units.entry(&r.sample).or_default().push(r.answer);
    }
    units
}

/// Strict majority per sample; each sample needs an odd number of answers.
pub fn majority_vote(records: &[AnnotationRecord]) -> Result<BTreeMap<String, u8>> {
    by_sample(records)
        .into_iter()
        .map(|(sample, answers)| {
            if answers.len() % 2 == 0 {
                return Err(Error::Invalid(format!(
                    "sample {sample:?} has {} answers; majority vote needs an odd count",
                    answers.len()
                )));
            }
            let ones = answers.iter().filter(|&&a| a == 1).count();
            Ok((sample.to_owned(), u8::from(2 * ones > answers.len())))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    pub value: f64,
    /// Every pairable answer was identical, so expected disagreement is
    /// zero and `value` is set to 1 by convention.
    pub degenerate: bool,
}

/// Nominal Krippendorff's alpha from the coincidence matrix. Samples with
/// fewer than two answers are not pairable and are ignored.
pub fn krippendorff_alpha(records: &[AnnotationRecord]) -> Result<Alpha> {
    let units: Vec<Vec<u8>> = by_sample(records).into_values().filter(|a| a.len() >= 2).collect();
    if units.len() < 2 {
        return Err(Error::Invalid("alpha needs at least two samples with two or more answers".into()));
    }
    let values: Vec<u8> = units.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let k = values.len();
    let index = |v: u8| values.binary_search(&v).expect("value collected above");
    let mut o = vec![vec![0.0f64; k]; k];
    for unit in &units {
        let m = unit.len() as f64;
        let mut counts = vec![0.0f64; k];
        for &v in unit {
            counts[index(v)] += 1.0;
        }
        for c in 0..k {
            for d in 0..k {
                let pairs = if c == d { counts[c] * (counts[c] - 1.0) } else { counts[c] * counts[d] };
                o[c][d] += pairs / (m - 1.0);
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += o[c][d];
                expected += n_c[c] * n_c[d];
            }
        }
    }
    if expected == 0.0 {
        return Ok(Alpha { value: 1.0, degenerate: true });
    }
    Ok(Alpha { value: 1.0 - (n - 1.0) * observed / expected, degenerate: false })
}

/// Share of agreeing answer pairs, pooled over samples.
pub fn pairwise_agreement(records: &[AnnotationRecord]) -> Option<f64> {
    let (mut agree, mut total) = (0u64, 0u64);
    for answers in by_sample(records).values() {
        for i in 0..answers.len() {
            for j in i + 1..answers.len() {
                total += 1;
                agree += u64::from(answers[i] == answers[j]);
            }
        }
    }
    (total > 0).then(|| agree as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub samples: usize,
    pub annotations: usize,
    pub pairwise_agreement: Option<f64>,
    pub alpha: f64,
    pub alpha_degenerate: bool,
    /// Samples whose majority answer is 1; absent if some sample has an
    /// even answer count.
    pub majority_positive: Option<usize>,
}

pub fn agreement_report(records: &[AnnotationRecord]) -> Result<AgreementReport> {
    let alpha = krippendorff_alpha(records)?;
    Ok(AgreementReport {
        samples: by_sample(records).len(),
        annotations: records.len(),
        pairwise_agreement: pairwise_agreement(records),
        alpha: alpha.value,
        alpha_degenerate: alpha.degenerate,
        majority_positive: majority_vote(records).ok().map(|m| m.values().filter(|&&v| v == 1).count()),
    })
}
