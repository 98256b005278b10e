//! Logistic regression over hashed character n-grams.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledText;
use crate::error::{Error, Result};
use crate::scoring::Scorer;

pub const MODEL_FORMAT: &str = "detox-charclf/1";

#[derive(Debug, Clone)]
pub struct ClfOptions {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Feature space is `2^hash_bits` wide.
    pub hash_bits: u32,
}

impl Default for ClfOptions {
    fn default() -> Self {
        Self { seed: 0, epochs: 10, learning_rate: 0.5, ngram_min: 3, ngram_max: 5, hash_bits: 18 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClfModel {
    pub format: String,
    pub seed: u64,
    pub epochs: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub hash_bits: u32,
    pub bias: f64,
    #[serde(with = "sparse")]
    pub weights: Vec<f64>,
}

/// Stores only non-zero weights as `[index, value]` pairs.
mod sparse {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(w: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(usize, f64)> = w.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
        (w.len(), pairs).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let (len, pairs): (usize, Vec<(usize, f64)>) = Deserialize::deserialize(d)?;
        let mut w = vec![0.0; len];
        for (i, v) in pairs {
            *w.get_mut(i).ok_or_else(|| serde::de::Error::custom(format!("weight index {i} >= {len}")))? = v;
        }
        Ok(w)
    }
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike the std
/// hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sparse L2-normalized n-gram count vector, sorted by index.
pub fn featurize(text: &str, ngram_min: usize, ngram_max: usize, hash_bits: u32) -> Vec<(usize, f64)> {
    let chars: Vec<char> = format!(" {text} ").chars().collect();
    let mask = (1u64 << hash_bits) - 1;
    let mut idx: Vec<usize> = Vec::new();
    let mut buf = String::new();
    for n in ngram_min..=ngram_max {
        for gram in chars.windows(n) {
            buf.clear();
            buf.extend(gram);
            let h = fnv1a(buf.as_bytes()) ^ n as u64;
            idx.push((h & mask) as usize);
        }
    }
    idx.sort_unstable();
    let mut feats: Vec<(usize, f64)> = Vec::new();
    for i in idx {
        match feats.last_mut() {
            Some((j, c)) if *j == i => *c += 1.0,
            _ => feats.push((i, 1.0)),
        }
    }
    let norm = feats.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, c) in &mut feats {
            *c /= norm;
        }
    }
    feats
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl ClfModel {
    pub fn zeros(opts: &ClfOptions) -> Self {
        Self {
            format: MODEL_FORMAT.to_owned(),
            seed: opts.seed,
            epochs: opts.epochs,
            ngram_min: opts.ngram_min,
            ngram_max: opts.ngram_max,
            hash_bits: opts.hash_bits,
            bias: 0.0,
            weights: vec![0.0; 1 << opts.hash_bits],
        }
    }

    /// Seeded SGD on the logistic loss.
    pub fn train(corpus: &[LabeledText], opts: &ClfOptions) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Invalid("cannot train a classifier on an empty corpus".into()));
        }
        let toxic = corpus.iter().filter(|t| t.label.is_toxic()).count();
        if toxic == 0 || toxic == corpus.len() {
            return Err(Error::Invalid("classifier training needs both toxic and neutral texts".into()));
        }
        if opts.ngram_min == 0 || opts.ngram_min > opts.ngram_max || !(1..=30).contains(&opts.hash_bits) {
            return Err(Error::Invalid("bad n-gram range or hash width".into()));
        }
        let mut model = Self::zeros(opts);
        let data: Vec<(Vec<(usize, f64)>, f64)> = corpus
            .iter()
            .map(|t| (model.features(&t.text), if t.label.is_toxic() { 1.0 } else { 0.0 }))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut step = 0usize;
        for _ in 0..opts.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let (x, y) = &data[i];
                let lr = opts.learning_rate / (1.0 + step as f64 / data.len() as f64).sqrt();
                let g = model.probability(x) - y;
                model.bias -= lr * g;
                for &(j, v) in x {
                    model.weights[j] -= lr * g * v;
                }
                step += 1;
            }
        }
        Ok(model)
    }

    fn features(&self, text: &str) -> Vec<(usize, f64)> {
        featurize(text, self.ngram_min, self.ngram_max, self.hash_bits)
    }

    fn probability(&self, x: &[(usize, f64)]) -> f64 {
        sigmoid(self.bias + x.iter().map(|&(j, v)| self.weights[j] * v).sum::<f64>())
    }

    /// Probability that `text` is toxic.
    pub fn predict_proba(&self, text: &str) -> f64 {
        self.probability(&self.features(text))
    }

    pub fn check_format(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Invalid(format!("unsupported classifier format {:?}", self.format)));
        }
        if self.weights.len() != 1usize << self.hash_bits {
            return Err(Error::Invalid("weight vector does not match hash width".into()));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("classifier has non-finite weights".into()));
        }
        Ok(())
    }
}

impl Scorer for ClfModel {
    fn name(&self) -> String {
        "charclf".into()
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        Ok(texts.par_iter().map(|t| self.predict_proba(t)).collect())
    }
}
