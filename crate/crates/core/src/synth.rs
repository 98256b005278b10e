//! Seeded synthetic corpora for tests, benchmarks and demos. None of them
//! contain real profanity: "toxic" words are invented.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Label, LabeledText, ParallelPair};
use crate::text::detokenize;

const CONSONANTS: &[char] = &['б', 'в', 'г', 'д', 'з', 'к', 'л', 'м', 'н', 'п', 'р', 'с', 'т', 'ф'];
const VOWELS: &[char] = &['а', 'е', 'и', 'о', 'у', 'ы', 'я', 'ё'];
const PUNCT: &[&str] = &[",", ".", "!", "?", ":"];

fn pseudo_word(rng: &mut impl Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(*CONSONANTS.choose(rng).unwrap());
        w.push(*VOWELS.choose(rng).unwrap());
    }
    w
}

/// `size` distinct pseudo-words, none of them in `exclude`.
pub fn vocabulary(size: usize, syllables: std::ops::RangeInclusive<usize>, exclude: &BTreeSet<String>, rng: &mut impl Rng) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let len = rng.random_range(syllables.clone());
        let w = pseudo_word(rng, len);
        if !exclude.contains(&w) && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn sentence(vocab: &[String], len: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut tokens: Vec<String> = Vec::with_capacity(len + 1);
    for i in 0..len {
        if i > 0 && rng.random_bool(0.1) {
            tokens.push(PUNCT.choose(rng).unwrap().to_string());
        }
        tokens.push(vocab.choose(rng).unwrap().clone());
    }
    if rng.random_bool(0.7) {
        tokens.push(PUNCT.choose(rng).unwrap().to_string());
    }
    tokens
}

/// Random sentences paired with randomly edited copies (token deletions,
/// substitutions and insertions). Some pairs are left unchanged.
pub fn random_parallel(n: usize, seed: u64) -> Vec<ParallelPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(400, 1..=3, &BTreeSet::new(), &mut rng);
    (0..n)
        .map(|_| {
            let len = rng.random_range(3..=18);
            let source = sentence(&vocab, len, &mut rng);
            let mut target = Vec::with_capacity(source.len() + 2);
            for tok in &source {
                match rng.random_range(0..20) {
                    0..=1 => {}
                    2..=3 => target.push(vocab.choose(&mut rng).unwrap().clone()),
                    4 => {
                        target.push(tok.clone());
                        target.push(vocab.choose(&mut rng).unwrap().clone());
                    }
                    _ => target.push(tok.clone()),
                }
            }
            if target.is_empty() {
                target.push(vocab[0].clone());
            }
            ParallelPair { source: detokenize(&source), targets: vec![detokenize(&target)] }
        })
        .collect()
}

/// Parallel data whose edits are decided by a word list: even-indexed
/// lexicon words are deleted, odd-indexed ones replaced by a fixed neutral
/// word. Lexicon words are never adjacent, so the gold tags are unambiguous.
#[derive(Debug, Clone)]
pub struct LexiconCorpus {
    pub lexicon: Vec<String>,
    pub replacements: Vec<String>,
    pub pairs: Vec<ParallelPair>,
}

pub fn lexicon_parallel(n: usize, lexicon_size: usize, seed: u64) -> LexiconCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(300, 2..=3, &BTreeSet::new(), &mut rng);
    let taken: BTreeSet<String> = vocab.iter().cloned().collect();
    let special = vocabulary(2 * lexicon_size, 3..=4, &taken, &mut rng);
    let (lexicon, replacements) = special.split_at(lexicon_size);
    let pairs = (0..n)
        .map(|_| {
            let len = rng.random_range(4..=14);
            let mut source = Vec::with_capacity(len);
            let mut target = Vec::with_capacity(len);
            let mut prev_special = true;
            for _ in 0..len {
                if !prev_special && rng.random_bool(0.25) {
                    let k = rng.random_range(0..lexicon_size);
                    source.push(lexicon[k].clone());
                    if k % 2 == 1 {
                        target.push(replacements[k].clone());
                    }
                    prev_special = true;
                } else {
                    let w = vocab.choose(&mut rng).unwrap().clone();
                    source.push(w.clone());
                    target.push(w);
                    prev_special = false;
                }
            }
            ParallelPair { source: detokenize(&source), targets: vec![detokenize(&target)] }
        })
        .collect();
    LexiconCorpus { lexicon: lexicon.to_vec(), replacements: replacements.to_vec(), pairs }
}

/// Labeled texts where toxicity is exactly the presence of a marker word.
/// Texts vary in case, punctuation and the letter ё so that behavioral
/// tests have something to perturb.
#[derive(Debug, Clone)]
pub struct MarkerCorpus {
    pub markers: Vec<String>,
    pub texts: Vec<LabeledText>,
}

pub fn marker_corpus(n: usize, seed: u64) -> MarkerCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(250, 1..=3, &BTreeSet::new(), &mut rng);
    let taken: BTreeSet<String> = vocab.iter().cloned().collect();
    let markers = vocabulary(5, 3..=3, &taken, &mut rng);
    let texts = (0..n)
        .map(|i| {
            let toxic = i % 2 == 0;
            let len = rng.random_range(3..=12);
            let mut words = sentence(&vocab, len, &mut rng);
            if toxic {
                let at = rng.random_range(0..=words.len());
                words.insert(at, markers.choose(&mut rng).unwrap().clone());
            }
            let mut text = detokenize(&words);
            if rng.random_bool(0.1) {
                text = text.to_uppercase();
            }
            LabeledText::new(text, Label::from_toxic(toxic))
        })
        .collect();
    MarkerCorpus { markers, texts }
}
