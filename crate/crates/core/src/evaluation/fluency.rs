//! Character trigram language model used as the default fluency scorer.
//!
//! Per-character log-probability is mapped to `[0, 1]` by a logistic curve
//! calibrated on the training text against a character-shuffled copy of it.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::Scorer;

const BOS: char = '\u{2}';
const EOS: char = '\u{3}';
/// Interpolation weights for trigram, bigram, unigram and uniform estimates.
const LAMBDAS: [f64; 4] = [0.6, 0.25, 0.1, 0.05];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Log-probability mapped to 0.5.
    pub midpoint: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CharLm {
    tri: HashMap<[char; 3], u32>,
    bi: HashMap<[char; 2], u32>,
    uni: HashMap<char, u32>,
    /// Trigram contexts `(a, b)` and their counts.
    ctx2: HashMap<[char; 2], u32>,
    ctx1: HashMap<char, u32>,
    total: u64,
    calibration: Option<Calibration>,
}

fn padded(text: &str) -> Vec<char> {
    let mut v = vec![BOS, BOS];
    v.extend(text.chars());
    v.push(EOS);
    v
}

impl CharLm {
    /// An empty model; scoring with it is an error.
    pub fn untrained() -> Self {
        Self::default()
    }

    pub fn is_trained(&self) -> bool {
        self.calibration.is_some()
    }

    pub fn calibration(&self) -> Option<Calibration> {
        self.calibration
    }

    /// Counts trigrams over `corpus` and calibrates against a shuffled copy.
    pub fn train(corpus: &[String], seed: u64) -> Result<Self> {
        if corpus.iter().all(|t| t.trim().is_empty()) {
            return Err(Error::Invalid("fluency model needs a non-empty reference corpus".into()));
        }
        let mut lm = Self::default();
        for text in corpus {
            let c = padded(text);
            for w in c.windows(3) {
                *lm.tri.entry([w[0], w[1], w[2]]).or_default() += 1;
                *lm.ctx2.entry([w[0], w[1]]).or_default() += 1;
                *lm.bi.entry([w[1], w[2]]).or_default() += 1;
                *lm.ctx1.entry(w[1]).or_default() += 1;
                *lm.uni.entry(w[2]).or_default() += 1;
                lm.total += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut clean, mut noisy) = (0.0, 0.0);
        let mut n = 0.0;
        for text in corpus.iter().filter(|t| !t.is_empty()) {
            let mut chars: Vec<char> = text.chars().collect();
            chars.shuffle(&mut rng);
            let shuffled: String = chars.into_iter().collect();
            clean += lm.log_prob_per_char(text);
            noisy += lm.log_prob_per_char(&shuffled);
            n += 1.0;
        }
        let (clean, noisy) = (clean / n, noisy / n);
        let gap = clean - noisy;
        // Clean text lands at sigmoid(2), shuffled text at sigmoid(-2).
        let slope = if gap > 1e-9 { 4.0 / gap } else { 1.0 };
        lm.calibration = Some(Calibration { midpoint: (clean + noisy) / 2.0, slope });
        Ok(lm)
    }

    /// Interpolated estimate; the weight of an unseen context passes down
    /// to the next lower order so the distribution still sums to one.
    fn prob(&self, a: char, b: char, c: char) -> f64 {
        let estimate = |num: Option<&u32>, den: Option<&u32>| match den {
            Some(&d) if d > 0 => Some(f64::from(num.copied().unwrap_or(0)) / f64::from(d)),
            _ => None,
        };
        let p1 = f64::from(self.uni.get(&c).copied().unwrap_or(0)) / self.total as f64;
        // One extra symbol for anything unseen.
        let p0 = 1.0 / (self.uni.len() + 1) as f64;
        let levels = [
            estimate(self.tri.get(&[a, b, c]), self.ctx2.get(&[a, b])),
            estimate(self.bi.get(&[b, c]), self.ctx1.get(&b)),
            Some(p1),
            Some(p0),
        ];
        let mut carry = 0.0;
        let mut p = 0.0;
        for (lambda, est) in LAMBDAS.iter().zip(levels) {
            match est {
                Some(v) => {
                    p += (lambda + carry) * v;
                    carry = 0.0;
                }
                None => carry += lambda,
            }
        }
        p
    }

    /// Mean natural-log probability per character, end marker included.
    pub fn log_prob_per_char(&self, text: &str) -> f64 {
        let c = padded(text);
        let windows = c.windows(3);
        let n = windows.len() as f64;
        c.windows(3).map(|w| self.prob(w[0], w[1], w[2]).ln()).sum::<f64>() / n
    }

    /// Fluency in `[0, 1]`; empty text scores 0.
    pub fn fluency(&self, text: &str) -> Result<f64> {
        let cal = self.calibration.ok_or_else(|| Error::Invalid("fluency model is not trained".into()))?;
        if text.trim().is_empty() {
            return Ok(0.0);
        }
        let z = cal.slope * (self.log_prob_per_char(text) - cal.midpoint);
        Ok(1.0 / (1.0 + (-z).exp()))
    }
}

impl Scorer for CharLm {
    fn name(&self) -> String {
        "char3lm".into()
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        texts.par_iter().map(|t| self.fluency(t)).collect()
    }
}
