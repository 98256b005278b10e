//! Averaged multiclass perceptron over hand-built token features.
//!
//! Two linear models share one training loop: a token model choosing
//! KEEP/DELETE/REPLACE for each token, and a gap model deciding whether
//! something is inserted before each token (and at the end).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TaggerExample;
use crate::edit::{Tag, TagSequence};
use crate::error::{Error, Result};
use crate::text::{fold_key, fold_yo};

pub const MODEL_FORMAT: &str = "detox-perceptron/1";

const TOKEN_CLASSES: usize = 3;
const GAP_CLASSES: usize = 2;

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub seed: u64,
    /// Words whose folded form fires the lexicon feature.
    pub lexicon: Vec<String>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 5, seed: 0, lexicon: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptronModel {
    pub format: String,
    pub seed: u64,
    pub epochs: usize,
    pub lexicon: BTreeSet<String>,
    pub token_weights: BTreeMap<String, [f64; TOKEN_CLASSES]>,
    pub gap_weights: BTreeMap<String, [f64; GAP_CLASSES]>,
}

fn neighbor(tokens: &[String], i: isize) -> String {
    if i < 0 {
        format!("<s{}>", -i)
    } else if i as usize >= tokens.len() {
        format!("</s{}>", i as usize - tokens.len() + 1)
    } else {
        tokens[i as usize].to_lowercase()
    }
}

fn token_features(tokens: &[String], i: usize, lexicon: &BTreeSet<String>) -> Vec<String> {
    let token = &tokens[i];
    let lower = token.to_lowercase();
    let mut f = vec![format!("w={token}"), format!("l={lower}"), format!("y={}", fold_yo(token))];
    let padded: Vec<char> = format!("<{lower}>").chars().collect();
    for gram in padded.windows(3) {
        f.push(format!("c3={}", gram.iter().collect::<String>()));
    }
    if lexicon.contains(&fold_key(token)) {
        f.push("lex".into());
    }
    let at = i as isize;
    for (name, offset) in [("p1", -1), ("p2", -2), ("n1", 1), ("n2", 2)] {
        f.push(format!("{name}={}", neighbor(tokens, at + offset)));
    }
    if i == 0 {
        f.push("start".into());
    }
    if i + 1 == tokens.len() {
        f.push("end".into());
    }
    f
}

/// Features of the gap before token `gap` (or at the end when
/// `gap == tokens.len()`), built from both flanking tokens.
fn gap_features(tokens: &[String], gap: usize, lexicon: &BTreeSet<String>) -> Vec<String> {
    let left = neighbor(tokens, gap as isize - 1);
    let right = neighbor(tokens, gap as isize);
    let mut f = vec![format!("L={left}"), format!("R={right}"), format!("LR={left}|{right}")];
    if gap > 0 && lexicon.contains(&fold_key(&tokens[gap - 1])) {
        f.push("L:lex".into());
    }
    if gap < tokens.len() && lexicon.contains(&fold_key(&tokens[gap])) {
        f.push("R:lex".into());
    }
    f
}

fn argmax<const K: usize>(scores: &[f64; K]) -> usize {
    let mut best = 0;
    for c in 1..K {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    best
}

fn score<const K: usize>(weights: &impl Fn(&str) -> Option<[f64; K]>, features: &[String]) -> [f64; K] {
    let mut s = [0.0; K];
    for f in features {
        if let Some(w) = weights(f) {
            for c in 0..K {
                s[c] += w[c];
            }
        }
    }
    s
}

/// Training-time weights with lazily accumulated sums for averaging.
struct Averaged<const K: usize> {
    weights: HashMap<String, [f64; K]>,
    totals: HashMap<String, [f64; K]>,
    stamps: HashMap<String, [u64; K]>,
    instances: u64,
}

impl<const K: usize> Averaged<K> {
    fn new() -> Self {
        Self { weights: HashMap::new(), totals: HashMap::new(), stamps: HashMap::new(), instances: 0 }
    }

    fn nudge(&mut self, feature: &str, class: usize, delta: f64) {
        let w = self.weights.entry(feature.to_owned()).or_insert([0.0; K]);
        let total = self.totals.entry(feature.to_owned()).or_insert([0.0; K]);
        let stamp = self.stamps.entry(feature.to_owned()).or_insert([0; K]);
        total[class] += (self.instances - stamp[class]) as f64 * w[class];
        stamp[class] = self.instances;
        w[class] += delta;
    }

    /// Updates unless the true class outscores every other class strictly,
    /// then counts the instance.
    fn learn(&mut self, features: &[String], truth: usize) {
        let scores = score(&|f: &str| self.weights.get(f).copied(), features);
        let rival = (0..K).filter(|&c| c != truth).max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)));
        if let Some(rival) = rival.filter(|&r| scores[r] >= scores[truth]) {
            for f in features {
                self.nudge(f, truth, 1.0);
                self.nudge(f, rival, -1.0);
            }
        }
        self.instances += 1;
    }

    fn finish(self) -> BTreeMap<String, [f64; K]> {
        let n = self.instances;
        let mut out = BTreeMap::new();
        for (f, w) in self.weights {
            let total = self.totals[&f];
            let stamp = self.stamps[&f];
            let mut avg = [0.0; K];
            for c in 0..K {
                avg[c] = (total[c] + (n - stamp[c]) as f64 * w[c]) / n as f64;
            }
            if avg.iter().any(|&v| v != 0.0) {
                out.insert(f, avg);
            }
        }
        out
    }
}

impl PerceptronModel {
    pub fn train(dataset: &[TaggerExample], opts: &TrainOptions) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Invalid("cannot train a tagger on an empty dataset".into()));
        }
        for (i, ex) in dataset.iter().enumerate() {
            ex.tags.check_len(ex.tokens.len()).map_err(|m| Error::Invalid(format!("example {i}: {m}")))?;
        }
        let lexicon: BTreeSet<String> = opts.lexicon.iter().map(|w| fold_key(w)).collect();

        let featurized: Vec<(Vec<Vec<String>>, Vec<Vec<String>>)> = dataset
            .iter()
            .map(|ex| {
                let toks = (0..ex.tokens.len()).map(|i| token_features(&ex.tokens, i, &lexicon)).collect();
                let gaps = (0..=ex.tokens.len()).map(|g| gap_features(&ex.tokens, g, &lexicon)).collect();
                (toks, gaps)
            })
            .collect();

        let mut token_model = Averaged::<TOKEN_CLASSES>::new();
        let mut gap_model = Averaged::<GAP_CLASSES>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        for _ in 0..opts.epochs {
            order.shuffle(&mut rng);
            for &idx in &order {
                let (tok_feats, gap_feats) = &featurized[idx];
                let tags = &dataset[idx].tags;
                for (feats, tag) in tok_feats.iter().zip(&tags.token_tags) {
                    token_model.learn(feats, tag.index());
                }
                for (feats, &ins) in gap_feats.iter().zip(&tags.gap_insert) {
                    gap_model.learn(feats, usize::from(ins));
                }
            }
        }

        Ok(Self {
            format: MODEL_FORMAT.to_owned(),
            seed: opts.seed,
            epochs: opts.epochs,
            lexicon,
            token_weights: if token_model.instances == 0 { BTreeMap::new() } else { token_model.finish() },
            gap_weights: if gap_model.instances == 0 { BTreeMap::new() } else { gap_model.finish() },
        })
    }

    /// Argmax per token and per gap; ties go to KEEP and to no-insert.
    pub fn predict(&self, tokens: &[String]) -> TagSequence {
        let token_tags = (0..tokens.len())
            .map(|i| {
                let feats = token_features(tokens, i, &self.lexicon);
                Tag::ALL[argmax(&score(&|f: &str| self.token_weights.get(f).copied(), &feats))]
            })
            .collect();
        let gap_insert = (0..=tokens.len())
            .map(|g| {
                let feats = gap_features(tokens, g, &self.lexicon);
                argmax(&score(&|f: &str| self.gap_weights.get(f).copied(), &feats)) == 1
            })
            .collect();
        TagSequence { token_tags, gap_insert }
    }

    pub fn check_format(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Invalid(format!("unsupported tagger model format {:?}", self.format)));
        }
        let finite = self.token_weights.values().flatten().chain(self.gap_weights.values().flatten()).all(|w| w.is_finite());
        if !finite {
            return Err(Error::Invalid("tagger model has non-finite weights".into()));
        }
        Ok(())
    }
}
