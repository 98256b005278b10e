//! Parallel and labeled corpus loading, and derivation of the tagger and
//! generator training sets from parallel pairs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edit::{
    extract_edits, fill_template, gold_fills, script_to_tags, template_with_slots, EditRecord, Segment, TagSequence,
    Template,
};
use crate::error::{Error, Result};
use crate::text::{detokenize, tokenize_words};

/// A toxic sentence and one or more neutral rewrites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub source: String,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Toxic,
    Neutral,
}

impl Label {
    pub fn is_toxic(self) -> bool {
        self == Label::Toxic
    }

    pub fn from_toxic(toxic: bool) -> Self {
        if toxic {
            Label::Toxic
        } else {
            Label::Neutral
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Toxic => "toxic",
            Label::Neutral => "neutral",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "toxic" | "1" => Ok(Label::Toxic),
            "neutral" | "0" => Ok(Label::Neutral),
            other => Err(format!("unknown label {other:?} (expected toxic or neutral)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: Label,
}

impl LabeledText {
    pub fn new(text: impl Into<String>, label: Label) -> Self {
        Self { text: text.into(), label }
    }
}

/// Parses parallel TSV: column 1 is the source, columns 2.. are references.
/// Empty reference cells are dropped.
pub fn parse_parallel(origin: &str, text: &str, skip_header: bool) -> Result<Vec<ParallelPair>> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if skip_header && idx == 0 {
            continue;
        }
        let line = line.trim_end_matches('\r');
        let mut cols = line.split('\t');
        let source = cols.next().unwrap_or_default();
        let targets: Vec<String> = cols.filter(|c| !c.trim().is_empty()).map(str::to_owned).collect();
        if line.is_empty() || !line.contains('\t') {
            return Err(Error::schema(origin, idx + 1, "expected a source column and at least one reference column"));
        }
        if source.trim().is_empty() {
            return Err(Error::schema(origin, idx + 1, "empty source cell"));
        }
        if targets.is_empty() {
            return Err(Error::schema(origin, idx + 1, "no non-empty reference"));
        }
        pairs.push(ParallelPair { source: source.to_owned(), targets });
    }
    Ok(pairs)
}

pub fn load_parallel(path: &Path, skip_header: bool) -> Result<Vec<ParallelPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_parallel(&path.display().to_string(), &text, skip_header)
}

/// Parses `text \t label` rows.
pub fn parse_labeled(origin: &str, text: &str, skip_header: bool) -> Result<Vec<LabeledText>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if skip_header && idx == 0 {
            continue;
        }
        let line = line.trim_end_matches('\r');
        let Some((body, label)) = line.rsplit_once('\t') else {
            return Err(Error::schema(origin, idx + 1, "expected `text<TAB>label`"));
        };
        if body.trim().is_empty() {
            return Err(Error::schema(origin, idx + 1, "empty text"));
        }
        let label = label.parse().map_err(|m: String| Error::schema(origin, idx + 1, m))?;
        out.push(LabeledText::new(body, label));
    }
    Ok(out)
}

pub fn load_labeled(path: &Path, skip_header: bool) -> Result<Vec<LabeledText>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled(&path.display().to_string(), &text, skip_header)
}

/// One word per line; blank lines and `#` comments are skipped.
pub fn load_word_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

/// Separator placed between the rendered template and the source sentence.
pub const SEPARATOR: &str = " [SEP] ";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcatOrder {
    #[default]
    TemplateFirst,
    SourceFirst,
}

impl FromStr for ConcatOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "template-first" => Ok(ConcatOrder::TemplateFirst),
            "source-first" => Ok(ConcatOrder::SourceFirst),
            other => Err(format!("unknown order {other:?}")),
        }
    }
}

/// Generator input string: template and source joined by [`SEPARATOR`].
pub fn generator_input(template: &str, source: &str, order: ConcatOrder) -> String {
    match order {
        ConcatOrder::TemplateFirst => format!("{template}{SEPARATOR}{source}"),
        ConcatOrder::SourceFirst => format!("{source}{SEPARATOR}{template}"),
    }
}

/// Generator target string: each fill preceded by its slot sentinel.
pub fn generator_output(fills: &[String]) -> String {
    let mut words = Vec::new();
    for (slot, fill) in fills.iter().enumerate() {
        words.push(crate::edit::mask_sentinel(slot));
        if !fill.is_empty() {
            words.push(fill.clone());
        }
    }
    words.join(" ")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DeriveOptions {
    pub case_fold: bool,
    pub order: ConcatOrder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggerExample {
    pub tokens: Vec<String>,
    pub tags: TagSequence,
}

impl From<&EditRecord> for TaggerExample {
    fn from(rec: &EditRecord) -> Self {
        Self { tokens: tokenize_words(&rec.source), tags: rec.tag_sequence() }
    }
}

fn first_target(pair: &ParallelPair) -> &str {
    pair.targets.first().map(String::as_str).unwrap_or_default()
}

/// Edit record of a pair against its first reference.
pub fn derive_record(pair: &ParallelPair, case_fold: bool) -> EditRecord {
    let target = first_target(pair);
    let script = extract_edits(&tokenize_words(&pair.source), &tokenize_words(target), case_fold);
    EditRecord::new(&pair.source, target, &script)
}

/// One edit record per pair, all-KEEP pairs included.
pub fn build_tagger_records(pairs: &[ParallelPair], case_fold: bool) -> Vec<EditRecord> {
    pairs.par_iter().map(|p| derive_record(p, case_fold)).collect()
}

pub fn build_tagger_dataset(pairs: &[ParallelPair], case_fold: bool) -> Vec<TaggerExample> {
    build_tagger_records(pairs, case_fold).iter().map(TaggerExample::from).collect()
}

/// Generator training example: an edit record extended with the rendered
/// template, the gold per-slot fills, and the flat input/output strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    #[serde(flatten)]
    pub edits: EditRecord,
    pub template: String,
    pub fills: Vec<String>,
    pub input: String,
    pub output: String,
}

impl GeneratorRecord {
    pub fn slot_count(&self) -> usize {
        self.fills.len()
    }

    /// Rebuilds the template from the stored tags and fills it with the
    /// stored gold fills.
    pub fn refill(&self) -> Result<Vec<String>> {
        let tokens = tokenize_words(&self.edits.source);
        let template = crate::edit::tags_to_template(&tokens, &self.edits.tag_sequence())?;
        let fills: Vec<Vec<String>> = self.fills.iter().map(|f| tokenize_words(f)).collect();
        fill_template(&template, &fills)
    }
}

fn generator_record(pair: &ParallelPair, opts: DeriveOptions) -> Result<Option<GeneratorRecord>> {
    let source_tokens = tokenize_words(&pair.source);
    let target = first_target(pair);
    let script = extract_edits(&source_tokens, &tokenize_words(target), opts.case_fold);
    let tags = script_to_tags(&script);
    let (template, map) = template_with_slots(&source_tokens, &tags)?;
    let slots = template.slot_count();
    if slots == 0 {
        return Ok(None);
    }
    let fills: Vec<String> = gold_fills(&script, &map, slots)?.iter().map(|f| detokenize(f)).collect();
    let rendered = template.render();
    Ok(Some(GeneratorRecord {
        input: generator_input(&rendered, &pair.source, opts.order),
        output: generator_output(&fills),
        edits: EditRecord::new(&pair.source, target, &script),
        template: rendered,
        fills,
    }))
}

/// Generator examples from gold tags; pairs without mask slots are dropped.
pub fn build_generator_dataset(pairs: &[ParallelPair], opts: DeriveOptions) -> Result<Vec<GeneratorRecord>> {
    let per_pair: Vec<Result<Option<GeneratorRecord>>> =
        pairs.par_iter().map(|p| generator_record(p, opts)).collect();
    let mut out = Vec::new();
    for (i, r) in per_pair.into_iter().enumerate() {
        if let Some(rec) = r.map_err(|e| e.at_input(i))? {
            out.push(rec);
        }
    }
    Ok(out)
}

/// Literal tokens of a template with each mask replaced by its sentinel.
pub fn template_words(template: &Template) -> Vec<String> {
    template
        .segments
        .iter()
        .flat_map(|s| match s {
            Segment::Literal(t) => t.clone(),
            Segment::Mask(slot) => vec![crate::edit::mask_sentinel(*slot)],
        })
        .collect()
}
