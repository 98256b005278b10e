//! Behavioral test battery for toxicity classifiers: invariance (INV) tests
//! perturb a text and expect the prediction to stay put, minimum
//! functionality (MFT) tests build texts with a known label.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledText};
use crate::error::Result;
use crate::scoring::Scorer;
use crate::text::{fold_key, fold_yo, tokenize};

/// Probability above which a text is predicted toxic.
pub const THRESHOLD: f64 = 0.5;

pub fn predicted_label(score: f64) -> Label {
    Label::from_toxic(score > THRESHOLD)
}

/// Toxic words used by the lexicon-dependent tests.
#[derive(Debug, Clone, Default)]
pub struct ToxicLexicon {
    words: Vec<String>,
    folded: HashSet<String>,
}

impl ToxicLexicon {
    pub fn new(words: impl IntoIterator<Item = String>) -> Self {
        let words: Vec<String> = words.into_iter().filter(|w| !w.trim().is_empty()).collect();
        let folded = words.iter().map(|w| fold_key(w)).collect();
        Self { words, folded }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.folded.contains(&fold_key(token))
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TestKind {
    Inv,
    Mft,
}

/// The built-in checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecklistTest {
    ReplaceYo,
    RemoveExclamations,
    AddExclamations,
    LowercaseCaps,
    RemoveQuestionMarks,
    AddTypos,
    MaskToxicChars,
    ToxicTypos,
    ConcatNeutralToxic,
    ConcatNeutralNeutral,
    AddToxicWord,
}

/// One generated test input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckCase {
    /// Untransformed text, for INV tests.
    pub original: Option<String>,
    pub text: String,
    /// Gold label of the original (INV) or the constructed label (MFT).
    pub label: Label,
}

const CHARS_PER_TYPO: usize = 20;

impl ChecklistTest {
    pub const ALL: [ChecklistTest; 11] = [
        ChecklistTest::ReplaceYo,
        ChecklistTest::RemoveExclamations,
        ChecklistTest::AddExclamations,
        ChecklistTest::LowercaseCaps,
        ChecklistTest::RemoveQuestionMarks,
        ChecklistTest::AddTypos,
        ChecklistTest::MaskToxicChars,
        ChecklistTest::ToxicTypos,
        ChecklistTest::ConcatNeutralToxic,
        ChecklistTest::ConcatNeutralNeutral,
        ChecklistTest::AddToxicWord,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChecklistTest::ReplaceYo => "replace_yo",
            ChecklistTest::RemoveExclamations => "remove_exclamations",
            ChecklistTest::AddExclamations => "add_exclamations",
            ChecklistTest::LowercaseCaps => "lowercase_caps",
            ChecklistTest::RemoveQuestionMarks => "remove_question_marks",
            ChecklistTest::AddTypos => "add_typos",
            ChecklistTest::MaskToxicChars => "mask_toxic_chars",
            ChecklistTest::ToxicTypos => "toxic_typos",
            ChecklistTest::ConcatNeutralToxic => "concat_neutral_toxic",
            ChecklistTest::ConcatNeutralNeutral => "concat_neutral_neutral",
            ChecklistTest::AddToxicWord => "add_toxic_word",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn kind(self) -> TestKind {
        if self.expected_label().is_some() {
            TestKind::Mft
        } else {
            TestKind::Inv
        }
    }

    pub fn expected_label(self) -> Option<Label> {
        match self {
            ChecklistTest::ConcatNeutralToxic | ChecklistTest::AddToxicWord => Some(Label::Toxic),
            ChecklistTest::ConcatNeutralNeutral => Some(Label::Neutral),
            _ => None,
        }
    }

    /// INV transform of one text; `None` when the test does not apply.
    pub fn transform(self, text: &str, lexicon: &ToxicLexicon, rng: &mut impl Rng) -> Option<String> {
        match self {
            ChecklistTest::ReplaceYo => text.contains(['ё', 'Ё']).then(|| fold_yo(text)),
            ChecklistTest::RemoveExclamations => text.contains('!').then(|| text.replace('!', "")),
            ChecklistTest::AddExclamations => Some(format!("{text}!!")),
            ChecklistTest::LowercaseCaps => is_all_caps(text).then(|| text.to_lowercase()),
            ChecklistTest::RemoveQuestionMarks => text.contains('?').then(|| text.replace('?', "")),
            ChecklistTest::AddTypos => {
                let mut chars: Vec<char> = text.chars().collect();
                let swaps = chars.len() / CHARS_PER_TYPO;
                if swaps == 0 {
                    return None;
                }
                for _ in 0..swaps {
                    let i = rng.random_range(0..chars.len() - 1);
                    chars.swap(i, i + 1);
                }
                Some(chars.into_iter().collect())
            }
            ChecklistTest::MaskToxicChars => edit_lexicon_words(text, lexicon, 3, |chars, rng| {
                let i = rng.random_range(1..chars.len() - 1);
                chars[i] = '*';
            }, rng),
            ChecklistTest::ToxicTypos => edit_lexicon_words(text, lexicon, 2, |chars, rng| {
                let i = rng.random_range(0..chars.len() - 1);
                chars.swap(i, i + 1);
            }, rng),
            ChecklistTest::ConcatNeutralToxic | ChecklistTest::ConcatNeutralNeutral | ChecklistTest::AddToxicWord => None,
        }
    }

    /// Test inputs generated from `corpus`.
    pub fn cases(self, corpus: &[LabeledText], lexicon: &ToxicLexicon, rng: &mut impl Rng) -> Vec<CheckCase> {
        let neutral: Vec<&str> = corpus.iter().filter(|t| !t.label.is_toxic()).map(|t| t.text.as_str()).collect();
        let pick = |rng: &mut dyn FnMut(usize) -> usize, pool: &[&str]| pool[rng(pool.len())].to_owned();
        match self {
            ChecklistTest::ConcatNeutralToxic => {
                if neutral.is_empty() {
                    return Vec::new();
                }
                corpus
                    .iter()
                    .filter(|t| t.label.is_toxic())
                    .map(|t| {
                        let n = pick(&mut |k| rng.random_range(0..k), &neutral);
                        CheckCase { original: None, text: format!("{n} {}", t.text), label: Label::Toxic }
                    })
                    .collect()
            }
            ChecklistTest::ConcatNeutralNeutral => {
                if neutral.len() < 2 {
                    return Vec::new();
                }
                (0..neutral.len())
                    .map(|i| {
                        let mut j = rng.random_range(0..neutral.len() - 1);
                        if j >= i {
                            j += 1;
                        }
                        CheckCase { original: None, text: format!("{} {}", neutral[i], neutral[j]), label: Label::Neutral }
                    })
                    .collect()
            }
            ChecklistTest::AddToxicWord => {
                if lexicon.words().is_empty() {
                    return Vec::new();
                }
                neutral
                    .iter()
                    .map(|text| {
                        let word = &lexicon.words()[rng.random_range(0..lexicon.words().len())];
                        let tokens = tokenize(text);
                        let at = rng.random_range(0..=tokens.len());
                        let inserted = if at == 0 {
                            format!("{word} {text}")
                        } else {
                            let end = tokens[at - 1].span.end;
                            format!("{} {word}{}", &text[..end], &text[end..])
                        };
                        CheckCase { original: None, text: inserted, label: Label::Toxic }
                    })
                    .collect()
            }
            inv => corpus
                .iter()
                .filter_map(|t| {
                    inv.transform(&t.text, lexicon, rng)
                        .map(|text| CheckCase { original: Some(t.text.clone()), text, label: t.label })
                })
                .collect(),
        }
    }
}

fn is_all_caps(text: &str) -> bool {
    let mut cased = text.chars().filter(|c| c.is_lowercase() || c.is_uppercase()).peekable();
    cased.peek().is_some() && cased.all(char::is_uppercase)
}

/// Applies `edit` to the characters of every lexicon word at least
/// `min_len` characters long; `None` if there is no such word.
fn edit_lexicon_words<R: Rng>(
    text: &str,
    lexicon: &ToxicLexicon,
    min_len: usize,
    edit: impl Fn(&mut Vec<char>, &mut R),
    rng: &mut R,
) -> Option<String> {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    let mut touched = false;
    for token in tokenize(text) {
        let mut chars: Vec<char> = token.text.chars().collect();
        if chars.len() < min_len || !lexicon.contains(&token.text) {
            continue;
        }
        edit(&mut chars, rng);
        out.push_str(&text[last..token.span.start]);
        out.extend(chars);
        last = token.span.end;
        touched = true;
    }
    out.push_str(&text[last..]);
    touched.then_some(out)
}

/// RNG for one test, independent of which other tests run.
pub fn test_rng(seed: u64, test: ChecklistTest) -> ChaCha8Rng {
    let idx = ChecklistTest::ALL.iter().position(|&t| t == test).unwrap_or(0) as u64;
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(idx + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub kind: TestKind,
    pub applicable: usize,
    pub errors: usize,
    /// `None` when no sample was applicable.
    pub error_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistReport {
    pub seed: u64,
    pub tests: Vec<TestResult>,
}

impl ChecklistReport {
    pub fn get(&self, test: ChecklistTest) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.name == test.name())
    }

    /// Sum of per-test error rates over applicable tests.
    pub fn total_error_rate(&self) -> f64 {
        self.tests.iter().filter_map(|t| t.error_rate).sum()
    }
}

/// Runs `tests` against `scorer`, one RNG stream per test.
pub fn run_checklist(
    scorer: &dyn Scorer,
    corpus: &[LabeledText],
    tests: &[ChecklistTest],
    lexicon: &ToxicLexicon,
    seed: u64,
) -> Result<ChecklistReport> {
    let results: Vec<Result<TestResult>> = tests
        .par_iter()
        .map(|&test| {
            let cases = test.cases(corpus, lexicon, &mut test_rng(seed, test));
            let mut texts: Vec<String> = cases.iter().map(|c| c.text.clone()).collect();
            texts.extend(cases.iter().filter_map(|c| c.original.clone()));
            let scores = if texts.is_empty() { Vec::new() } else { scorer.score_batch(&texts)? };
            let (transformed, originals) = scores.split_at(cases.len());
            let errors = match test.expected_label() {
                Some(expected) => transformed.iter().filter(|&&s| predicted_label(s) != expected).count(),
                None => transformed
                    .iter()
                    .zip(originals)
                    .filter(|(&a, &b)| predicted_label(a) != predicted_label(b))
                    .count(),
            };
            let applicable = cases.len();
            Ok(TestResult {
                name: test.name().to_owned(),
                kind: test.kind(),
                applicable,
                errors,
                error_rate: (applicable > 0).then(|| errors as f64 / applicable as f64),
            })
        })
        .collect();
    Ok(ChecklistReport { seed, tests: results.into_iter().collect::<Result<_>>()? })
}

/// The corpus plus every generated case: INV cases keep the original's
/// label, MFT cases carry their constructed label.
pub fn augment_corpus(
    corpus: &[LabeledText],
    tests: &[ChecklistTest],
    lexicon: &ToxicLexicon,
    seed: u64,
) -> Vec<LabeledText> {
    let mut out = corpus.to_vec();
    for &test in tests {
        for case in test.cases(corpus, lexicon, &mut test_rng(seed, test)) {
            out.push(LabeledText::new(case.text, case.label));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{ConstantScorer, FnScorer};

    fn lexicon() -> ToxicLexicon {
        ToxicLexicon::new(["дурак".to_string(), "козел".to_string()])
    }

    fn corpus() -> Vec<LabeledText> {
        vec![
            LabeledText::new("ты дурак!", Label::Toxic),
            LabeledText::new("КАКОЙ ЖЕ ТЫ КОЗЕЛ", Label::Toxic),
            LabeledText::new("всё хорошо, правда?", Label::Neutral),
            LabeledText::new("добрый вечер всем участникам нашего обсуждения", Label::Neutral),
        ]
    }

    #[test]
    fn transforms() {
        let lex = lexicon();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = |test: ChecklistTest, s: &str, rng: &mut ChaCha8Rng| test.transform(s, &lex, rng);
        assert_eq!(t(ChecklistTest::ReplaceYo, "ёж", &mut rng).as_deref(), Some("еж"));
        assert_eq!(t(ChecklistTest::ReplaceYo, "еж", &mut rng), None);
        assert_eq!(t(ChecklistTest::RemoveExclamations, "а!!", &mut rng).as_deref(), Some("а"));
        assert_eq!(t(ChecklistTest::AddExclamations, "а", &mut rng).as_deref(), Some("а!!"));
        assert_eq!(t(ChecklistTest::LowercaseCaps, "ТЫ КОЗЕЛ!", &mut rng).as_deref(), Some("ты козел!"));
        assert_eq!(t(ChecklistTest::LowercaseCaps, "Ты козел", &mut rng), None);
        assert_eq!(t(ChecklistTest::LowercaseCaps, "123", &mut rng), None);
        assert_eq!(t(ChecklistTest::RemoveQuestionMarks, "да?", &mut rng).as_deref(), Some("да"));

        let masked = t(ChecklistTest::MaskToxicChars, "ну ты дурак", &mut rng).unwrap();
        assert!(masked.starts_with("ну ты д") && masked.ends_with('к'));
        assert_eq!(masked.chars().filter(|&c| c == '*').count(), 1);
        assert_eq!(t(ChecklistTest::MaskToxicChars, "ну ты", &mut rng), None);

        let typo = t(ChecklistTest::ToxicTypos, "ты козел, брат", &mut rng).unwrap();
        assert!(typo.starts_with("ты ") && typo.ends_with(", брат"));
        let mut a: Vec<char> = typo[5..15].chars().collect();
        let mut b: Vec<char> = "козел".chars().collect();
        a.truncate(5);
        a.sort();
        b.sort();
        assert_eq!(a, b);

        let long = "a".repeat(19) + "bcdefghijklmnopqrstuvw";
        let swapped = t(ChecklistTest::AddTypos, &long, &mut rng).unwrap();
        assert_eq!(swapped.len(), long.len());
        assert_eq!(t(ChecklistTest::AddTypos, "short", &mut rng), None);
    }

    #[test]
    fn constant_classifier() {
        let report = run_checklist(&ConstantScorer(0.0), &corpus(), &ChecklistTest::ALL, &lexicon(), 0).unwrap();
        for r in &report.tests {
            if r.kind == TestKind::Inv {
                assert_eq!(r.errors, 0, "{}", r.name);
            }
        }
        let concat = report.get(ChecklistTest::ConcatNeutralToxic).unwrap();
        assert_eq!((concat.applicable, concat.error_rate), (2, Some(1.0)));
        assert_eq!(report.get(ChecklistTest::ConcatNeutralNeutral).unwrap().error_rate, Some(0.0));
        assert_eq!(report.get(ChecklistTest::ReplaceYo).unwrap().applicable, 1);
    }

    #[test]
    fn oracle_classifier_passes_add_toxic_word() {
        let lex = lexicon();
        let oracle = FnScorer(|text: &str| {
            if tokenize(text).iter().any(|t| lexicon().contains(&t.text)) {
                1.0
            } else {
                0.0
            }
        });
        let report = run_checklist(&oracle, &corpus(), &[ChecklistTest::AddToxicWord], &lex, 3).unwrap();
        let r = &report.tests[0];
        assert_eq!((r.applicable, r.errors), (2, 0));
    }

    #[test]
    fn inapplicable_tests_report_no_rate() {
        let report =
            run_checklist(&ConstantScorer(0.0), &corpus()[..1], &[ChecklistTest::ConcatNeutralToxic], &lexicon(), 0)
                .unwrap();
        assert_eq!(report.tests[0].applicable, 0);
        assert_eq!(report.tests[0].error_rate, None);
    }

    #[test]
    fn augmentation_counts_and_labels() {
        let c = corpus();
        assert_eq!(augment_corpus(&c, &[], &lexicon(), 0), c);
        let aug = augment_corpus(&c, &[ChecklistTest::RemoveExclamations], &lexicon(), 0);
        assert_eq!(aug.len(), c.len() + 1);
        assert_eq!(aug.last().unwrap(), &LabeledText::new("ты дурак", Label::Toxic));

        let aug = augment_corpus(&c, &ChecklistTest::ALL, &lexicon(), 5);
        for case in &aug[c.len()..] {
            assert!(!case.text.is_empty());
        }
    }

    #[test]
    fn reproducible_with_seed() {
        let scorer = FnScorer(|t: &str| (t.chars().count() % 7) as f64 / 6.0);
        let a = run_checklist(&scorer, &corpus(), &ChecklistTest::ALL, &lexicon(), 9).unwrap();
        let b = run_checklist(&scorer, &corpus(), &ChecklistTest::ALL, &lexicon(), 9).unwrap();
        assert_eq!(a, b);
    }
}
