//! Token-level edit scripts between parallel sentences, their coarse tag
//! projection, and the mask templates built from tags.
//!
//! The pipeline is: [`extract_edits`] aligns a source/target pair under unit
//! Levenshtein costs, [`script_to_tags`] drops the replacement content to get
//! the per-token tags a tagger learns, and [`tags_to_template`] turns tags into
//! the masked template a generator fills back in.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{detokenize, fold_key};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EditKind {
    Keep,
    Delete,
    Replace,
    Insert,
}

/// Coarse per-token tag. The declaration order is the tie-break order used
/// by every predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Keep,
    Delete,
    Replace,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::Keep, Tag::Delete, Tag::Replace];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Keep => "KEEP",
            Tag::Delete => "DELETE",
            Tag::Replace => "REPLACE",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One typed edit over a half-open range of source token indices.
///
/// `INSERT` ops have an empty range anchored at the gap they insert into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditOp {
    pub kind: EditKind,
    pub source_range: Range<usize>,
    pub replacement: Vec<String>,
}

impl EditOp {
    pub fn keep(range: Range<usize>) -> Self {
        Self { kind: EditKind::Keep, source_range: range, replacement: Vec::new() }
    }

    pub fn delete(range: Range<usize>) -> Self {
        Self { kind: EditKind::Delete, source_range: range, replacement: Vec::new() }
    }

    pub fn replace(range: Range<usize>, replacement: Vec<String>) -> Self {
        Self { kind: EditKind::Replace, source_range: range, replacement }
    }

    pub fn insert(at: usize, replacement: Vec<String>) -> Self {
        Self { kind: EditKind::Insert, source_range: at..at, replacement }
    }

    /// Cheapest unit-cost realization of this op.
    pub fn cost(&self) -> usize {
        match self.kind {
            EditKind::Keep => 0,
            EditKind::Delete => self.source_range.len(),
            EditKind::Insert => self.replacement.len(),
            EditKind::Replace => self.source_range.len().max(self.replacement.len()),
        }
    }
}

/// Wire form of an op inside a JSON-lines record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpRecord {
    pub kind: EditKind,
    pub src_start: usize,
    pub src_end: usize,
    pub repl: Vec<String>,
}

impl From<&EditOp> for OpRecord {
    fn from(op: &EditOp) -> Self {
        Self {
            kind: op.kind,
            src_start: op.source_range.start,
            src_end: op.source_range.end,
            repl: op.replacement.clone(),
        }
    }
}

impl From<OpRecord> for EditOp {
    fn from(r: OpRecord) -> Self {
        Self { kind: r.kind, source_range: r.src_start..r.src_end, replacement: r.repl }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
}

impl EditScript {
    pub fn new(ops: Vec<EditOp>) -> Self {
        Self { ops }
    }

    pub fn cost(&self) -> usize {
        self.ops.iter().map(EditOp::cost).sum()
    }

    /// Number of source tokens the script covers.
    pub fn source_len(&self) -> usize {
        self.ops.last().map_or(0, |op| op.source_range.end)
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|op| op.kind == EditKind::Keep)
    }

    /// Checks that ops tile `0..source_len` in order and that every op has
    /// the replacement shape its kind requires.
    pub fn validate(&self, source_len: usize) -> Result<()> {
        let mut cursor = 0;
        for (i, op) in self.ops.iter().enumerate() {
            let r = &op.source_range;
            if r.start != cursor {
                return Err(Error::Script(format!(
                    "op {i} starts at token {} but previous coverage ends at {cursor}",
                    r.start
                )));
            }
            if r.end < r.start || r.end > source_len {
                return Err(Error::Script(format!(
                    "op {i} range {}..{} outside 0..{source_len}",
                    r.start, r.end
                )));
            }
            match op.kind {
                EditKind::Insert if !r.is_empty() => {
                    return Err(Error::Script(format!("INSERT op {i} has a non-empty source range")))
                }
                EditKind::Keep | EditKind::Delete | EditKind::Replace if r.is_empty() => {
                    return Err(Error::Script(format!("op {i} has an empty source range")))
                }
                _ => {}
            }
            match op.kind {
                EditKind::Keep | EditKind::Delete if !op.replacement.is_empty() => {
                    return Err(Error::Script(format!("op {i} must not carry replacement tokens")))
                }
                EditKind::Replace | EditKind::Insert if op.replacement.is_empty() => {
                    return Err(Error::Script(format!("op {i} needs replacement tokens")))
                }
                _ => {}
            }
            cursor = r.end;
        }
        if cursor != source_len {
            return Err(Error::Script(format!(
                "script covers {cursor} tokens, source has {source_len}"
            )));
        }
        Ok(())
    }

    /// Appends an op, merging it into the previous one when both have the
    /// same kind and touch, and collapsing DELETE followed by INSERT at the
    /// delete's end into a REPLACE.
    fn push(&mut self, op: EditOp) {
        let Some(last) = self.ops.last_mut() else {
            self.ops.push(op);
            return;
        };
        let touching = last.source_range.end == op.source_range.start;
        if touching && last.kind == op.kind {
            last.source_range.end = op.source_range.end;
            last.replacement.extend(op.replacement);
            return;
        }
        if touching && last.kind == EditKind::Delete && op.kind == EditKind::Insert {
            let mut collapsed = self.ops.pop().expect("checked above");
            collapsed.kind = EditKind::Replace;
            collapsed.replacement = op.replacement;
            self.push(collapsed);
            return;
        }
        self.ops.push(op);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// Unit-cost token edit distance, filling the suffix table used by
/// [`extract_edits`]. `table[i][j]` is the distance between `a[i..]` and
/// `b[j..]`.
fn suffix_distances(eq: &dyn Fn(usize, usize) -> bool, n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            table[i][j] = if i == n {
                m - j
            } else if j == m {
                n - i
            } else {
                let diag = table[i + 1][j + 1] + usize::from(!eq(i, j));
                diag.min(table[i + 1][j] + 1).min(table[i][j + 1] + 1)
            };
        }
    }
    table
}

fn token_eq<'a, S: AsRef<str>, T: AsRef<str>>(
    source: &'a [S],
    target: &'a [T],
    case_fold: bool,
) -> impl Fn(usize, usize) -> bool + 'a {
    let folded: Option<(Vec<String>, Vec<String>)> = case_fold.then(|| {
        (
            source.iter().map(|s| fold_key(s.as_ref())).collect(),
            target.iter().map(|t| fold_key(t.as_ref())).collect(),
        )
    });
    move |i, j| match &folded {
        Some((a, b)) => a[i] == b[j],
        None => source[i].as_ref() == target[j].as_ref(),
    }
}

/// Unit-cost edit distance between two token sequences.
pub fn edit_distance<S: AsRef<str>, T: AsRef<str>>(source: &[S], target: &[T], case_fold: bool) -> usize {
    let eq = token_eq(source, target, case_fold);
    suffix_distances(&eq, source.len(), target.len())[0][0]
}

/// Minimal edit script turning `source` into `target`.
///
/// The alignment is traced front to back, preferring match, then
/// substitution, then deletion, then insertion whenever several moves stay on
/// an optimal path, so equal tokens are aligned as early as possible. With
/// `case_fold`, tokens compare after lowercasing and `ё` folding; KEEP spans
/// then reproduce the source spelling, so replay matches `target` only up to
/// folding.
pub fn extract_edits<S: AsRef<str>, T: AsRef<str>>(source: &[S], target: &[T], case_fold: bool) -> EditScript {
    let (n, m) = (source.len(), target.len());
    let eq = token_eq(source, target, case_fold);
    let table = suffix_distances(&eq, n, m);

    let mut script = EditScript::default();
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = table[i][j];
        let step = if i < n && j < m && eq(i, j) && here == table[i + 1][j + 1] {
            Step::Match
        } else if i < n && j < m && !eq(i, j) && here == table[i + 1][j + 1] + 1 {
            Step::Substitute
        } else if i < n && here == table[i + 1][j] + 1 {
            Step::Delete
        } else {
            Step::Insert
        };
        match step {
            Step::Match => {
                script.push(EditOp::keep(i..i + 1));
                i += 1;
                j += 1;
            }
            Step::Substitute => {
                script.push(EditOp::replace(i..i + 1, vec![target[j].as_ref().to_owned()]));
                i += 1;
                j += 1;
            }
            Step::Delete => {
                script.push(EditOp::delete(i..i + 1));
                i += 1;
            }
            Step::Insert => {
                script.push(EditOp::insert(i, vec![target[j].as_ref().to_owned()]));
                j += 1;
            }
        }
    }
    script
}

/// Replays `script` over `source`.
pub fn apply_script<S: AsRef<str>>(source: &[S], script: &EditScript) -> Result<Vec<String>> {
    script.validate(source.len())?;
    let mut out = Vec::with_capacity(source.len());
    for op in &script.ops {
        match op.kind {
            EditKind::Keep => out.extend(source[op.source_range.clone()].iter().map(|s| s.as_ref().to_owned())),
            EditKind::Delete => {}
            EditKind::Replace | EditKind::Insert => out.extend(op.replacement.iter().cloned()),
        }
    }
    Ok(out)
}

/// Per-token coarse tags plus per-gap insertion markers.
///
/// `gap_insert[i]` marks an insertion before token `i`; the last entry marks
/// an insertion at the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub token_tags: Vec<Tag>,
    pub gap_insert: Vec<bool>,
}

impl TagSequence {
    pub fn all_keep(len: usize) -> Self {
        Self { token_tags: vec![Tag::Keep; len], gap_insert: vec![false; len + 1] }
    }

    pub fn len(&self) -> usize {
        self.token_tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_tags.is_empty()
    }

    pub fn check_len(&self, tokens: usize) -> Result<(), String> {
        if self.token_tags.len() != tokens {
            return Err(format!("{} tags for {tokens} tokens", self.token_tags.len()));
        }
        if self.gap_insert.len() != tokens + 1 {
            return Err(format!("{} gap markers for {tokens} tokens (expected {})", self.gap_insert.len(), tokens + 1));
        }
        Ok(())
    }

    /// True when filling needs a generator: some REPLACE tag or insertion gap.
    pub fn needs_generator(&self) -> bool {
        self.token_tags.contains(&Tag::Replace) || self.gap_insert.contains(&true)
    }

    pub fn deleted_count(&self) -> usize {
        self.token_tags.iter().filter(|&&t| t == Tag::Delete).count()
    }

    pub fn gaps_as_bits(&self) -> Vec<u8> {
        self.gap_insert.iter().map(|&g| u8::from(g)).collect()
    }
}

pub fn script_to_tags(script: &EditScript) -> TagSequence {
    let mut tags = TagSequence::all_keep(script.source_len());
    for op in &script.ops {
        match op.kind {
            EditKind::Insert => tags.gap_insert[op.source_range.start] = true,
            kind => {
                let tag = match kind {
                    EditKind::Delete => Tag::Delete,
                    EditKind::Replace => Tag::Replace,
                    _ => Tag::Keep,
                };
                for t in &mut tags.token_tags[op.source_range.clone()] {
                    *t = tag;
                }
            }
        }
    }
    tags
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Literal(Vec<String>),
    Mask(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub segments: Vec<Segment>,
}

/// Sentinel string rendered for mask slot `slot`.
pub fn mask_sentinel(slot: usize) -> String {
    format!("[MASK{slot}]")
}

impl Template {
    pub fn slot_count(&self) -> usize {
        self.segments.iter().filter(|s| matches!(s, Segment::Mask(_))).count()
    }

    /// Flat string form with `[MASKi]` sentinels in place of the slots.
    pub fn render(&self) -> String {
        let mut words = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(tokens) => words.extend(tokens.iter().cloned()),
                Segment::Mask(slot) => words.push(mask_sentinel(*slot)),
            }
        }
        detokenize(&words)
    }

    pub fn literal_tokens(&self) -> impl Iterator<Item = &String> {
        self.segments.iter().flat_map(|s| match s {
            Segment::Literal(t) => t.as_slice(),
            Segment::Mask(_) => &[],
        })
    }
}

/// Which mask slot each source token and gap ended up in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotMap {
    pub token_slot: Vec<Option<usize>>,
    pub gap_slot: Vec<Option<usize>>,
}

/// Builds the template together with the token/gap to slot assignment.
///
/// A slot stays open across a run of REPLACE tokens and any true gap
/// markers touching that run; KEEP and DELETE tokens close it.
pub fn template_with_slots<S: AsRef<str>>(source: &[S], tags: &TagSequence) -> Result<(Template, SlotMap)> {
    tags.check_len(source.len()).map_err(Error::Script)?;
    let n = source.len();
    let mut segments: Vec<Segment> = Vec::new();
    let mut map = SlotMap { token_slot: vec![None; n], gap_slot: vec![None; n + 1] };
    let mut open: Option<usize> = None;
    let mut next_slot = 0;

    let mut open_slot = |open: &mut Option<usize>, segments: &mut Vec<Segment>| -> usize {
        if let Some(s) = *open {
            return s;
        }
        let s = next_slot;
        next_slot += 1;
        segments.push(Segment::Mask(s));
        *open = Some(s);
        s
    };

    for p in 0..=n {
        if tags.gap_insert[p] {
            map.gap_slot[p] = Some(open_slot(&mut open, &mut segments));
        }
        if p == n {
            break;
        }
        match tags.token_tags[p] {
            Tag::Keep => {
                open = None;
                let word = source[p].as_ref().to_owned();
                match segments.last_mut() {
                    Some(Segment::Literal(tokens)) => tokens.push(word),
                    _ => segments.push(Segment::Literal(vec![word])),
                }
            }
            Tag::Delete => open = None,
            Tag::Replace => map.token_slot[p] = Some(open_slot(&mut open, &mut segments)),
        }
    }
    Ok((Template { segments }, map))
}

pub fn tags_to_template<S: AsRef<str>>(source: &[S], tags: &TagSequence) -> Result<Template> {
    template_with_slots(source, tags).map(|(t, _)| t)
}

/// Target-side tokens each slot must produce for `script` to be reproduced.
pub fn gold_fills(script: &EditScript, map: &SlotMap, slot_count: usize) -> Result<Vec<Vec<String>>> {
    let mut fills = vec![Vec::new(); slot_count];
    for op in &script.ops {
        let slot = match op.kind {
            EditKind::Replace => map.token_slot.get(op.source_range.start).copied().flatten(),
            EditKind::Insert => map.gap_slot.get(op.source_range.start).copied().flatten(),
            EditKind::Keep | EditKind::Delete => continue,
        };
        let slot = slot.ok_or_else(|| Error::Script(format!("op at {:?} has no mask slot", op.source_range)))?;
        fills[slot].extend(op.replacement.iter().cloned());
    }
    Ok(fills)
}

/// Concatenates literals and per-slot fills in template order.
pub fn fill_template(template: &Template, fills: &[Vec<String>]) -> Result<Vec<String>> {
    let slots = template.slot_count();
    if fills.len() != slots {
        return Err(Error::protocol(
            "generator",
            None,
            format!("{} fills for {slots} mask slots", fills.len()),
        ));
    }
    let mut out = Vec::new();
    for seg in &template.segments {
        match seg {
            Segment::Literal(tokens) => out.extend(tokens.iter().cloned()),
            Segment::Mask(slot) => out.extend(fills[*slot].iter().cloned()),
        }
    }
    Ok(out)
}

/// One JSON-lines record describing the edits of a parallel pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    pub source: String,
    pub target: String,
    pub tags: Vec<Tag>,
    pub gaps: Vec<u8>,
    pub ops: Vec<OpRecord>,
}

impl EditRecord {
    pub fn new(source: &str, target: &str, script: &EditScript) -> Self {
        let tags = script_to_tags(script);
        Self {
            source: source.to_owned(),
            target: target.to_owned(),
            gaps: tags.gaps_as_bits(),
            tags: tags.token_tags,
            ops: script.ops.iter().map(OpRecord::from).collect(),
        }
    }

    pub fn tag_sequence(&self) -> TagSequence {
        TagSequence { token_tags: self.tags.clone(), gap_insert: self.gaps.iter().map(|&g| g != 0).collect() }
    }

    pub fn script(&self) -> EditScript {
        EditScript::new(self.ops.iter().cloned().map(EditOp::from).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize_words;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        tokenize_words(s)
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Plain exhaustive recursion over all alignments.
    fn brute_distance(a: &[String], b: &[String]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = brute_distance(ra, rb) + usize::from(x != y);
                let del = brute_distance(ra, b) + 1;
                let ins = brute_distance(a, rb) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    const EX1_SRC: &str = "сколько же е**нутых в россии в месте с тобой";
    const EX1_TGT: &str = "сколько же неадекватных в россии в месте с тобой";
    const EX2_SRC: &str = "какие же эти люди сволочи!!!";
    const EX2_TGT: &str = "какие же эти люди плохие !";

    #[test]
    fn identity_is_single_keep() {
        let s = words("a b c");
        assert_eq!(extract_edits(&s, &s, false).ops, vec![EditOp::keep(0..3)]);
        assert!(extract_edits::<String, String>(&[], &[], false).ops.is_empty());
    }

    #[test]
    fn single_substitution_example() {
        let script = extract_edits(&words(EX1_SRC), &words(EX1_TGT), false);
        assert_eq!(
            script.ops,
            vec![
                EditOp::keep(0..2),
                EditOp::replace(2..3, strings(&["неадекватных"])),
                EditOp::keep(3..9),
            ]
        );
    }

    #[test]
    fn substitution_and_trailing_deletes_example() {
        let (s, t) = (words(EX2_SRC), words(EX2_TGT));
        let script = extract_edits(&s, &t, false);
        assert_eq!(
            script.ops,
            vec![
                EditOp::keep(0..4),
                EditOp::replace(4..5, strings(&["плохие"])),
                EditOp::keep(5..6),
                EditOp::delete(6..8),
            ]
        );
        assert_eq!(script.cost(), brute_distance(&s, &t));
    }

    #[test]
    fn insertion_from_empty_source() {
        let script = extract_edits::<String, _>(&[], &["a"], false);
        assert_eq!(script.ops, vec![EditOp::insert(0, strings(&["a"]))]);
        assert_eq!(apply_script::<String>(&[], &script).unwrap(), strings(&["a"]));
    }

    #[test]
    fn case_fold_aligns_case_variants() {
        let s = words("Ёлка зелёная");
        let t = words("елка Зеленая");
        assert_eq!(extract_edits(&s, &t, true).ops, vec![EditOp::keep(0..2)]);
        assert_eq!(extract_edits(&s, &t, false).cost(), 2);
    }

    #[test]
    fn delete_then_insert_collapses() {
        let mut script = EditScript::default();
        script.push(EditOp::delete(0..2));
        script.push(EditOp::insert(2, strings(&["x"])));
        script.push(EditOp::replace(2..3, strings(&["y"])));
        assert_eq!(script.ops, vec![EditOp::replace(0..3, strings(&["x", "y"]))]);
    }

    #[test]
    fn apply_rejects_bad_coverage() {
        let s = strings(&["a", "b"]);
        let gap = EditScript::new(vec![EditOp::keep(0..1)]);
        assert!(matches!(apply_script(&s, &gap), Err(Error::Script(_))));
        let overlap = EditScript::new(vec![EditOp::keep(0..2), EditOp::delete(1..2)]);
        assert!(apply_script(&s, &overlap).is_err());
        let bare_replace = EditScript::new(vec![EditOp::replace(0..2, vec![])]);
        assert!(apply_script(&s, &bare_replace).is_err());
        let identity = EditScript::new(vec![EditOp::keep(0..2)]);
        assert_eq!(apply_script(&s, &identity).unwrap(), s);
    }

    #[test]
    fn tags_from_scripts() {
        let keep = EditScript::new(vec![EditOp::keep(0..3)]);
        assert_eq!(script_to_tags(&keep), TagSequence::all_keep(3));

        let script = extract_edits(&words(EX2_SRC), &words(EX2_TGT), false);
        let tags = script_to_tags(&script);
        use Tag::*;
        assert_eq!(tags.token_tags, vec![Keep, Keep, Keep, Keep, Replace, Keep, Delete, Delete]);
        assert_eq!(tags.gap_insert, vec![false; 9]);

        let ins = EditScript::new(vec![EditOp::insert(0, strings(&["x"])), EditOp::keep(0..1)]);
        let tags = script_to_tags(&ins);
        assert_eq!(tags.gap_insert, vec![true, false]);
    }

    #[test]
    fn templates_from_tags() {
        let s = words("a b c");
        let t = tags_to_template(&s, &TagSequence::all_keep(3)).unwrap();
        assert_eq!(t.segments, vec![Segment::Literal(s.clone())]);

        let src = words(EX2_SRC);
        let tags = script_to_tags(&extract_edits(&src, &words(EX2_TGT), false));
        let t = tags_to_template(&src, &tags).unwrap();
        assert_eq!(
            t.segments,
            vec![
                Segment::Literal(strings(&["какие", "же", "эти", "люди"])),
                Segment::Mask(0),
                Segment::Literal(strings(&["!"])),
            ]
        );
        assert_eq!(t.render(), "какие же эти люди [MASK0]!");

        let merged = TagSequence { token_tags: vec![Tag::Replace], gap_insert: vec![false, true] };
        let t = tags_to_template(&strings(&["x"]), &merged).unwrap();
        assert_eq!(t.segments, vec![Segment::Mask(0)]);
    }

    #[test]
    fn separate_runs_get_separate_slots() {
        use Tag::*;
        let src = strings(&["a", "b", "c", "d", "e"]);
        let tags = TagSequence {
            token_tags: vec![Replace, Keep, Replace, Delete, Replace],
            gap_insert: vec![false, false, false, false, false, true],
        };
        let (t, map) = template_with_slots(&src, &tags).unwrap();
        assert_eq!(
            t.segments,
            vec![
                Segment::Mask(0),
                Segment::Literal(strings(&["b"])),
                Segment::Mask(1),
                Segment::Mask(2),
            ]
        );
        assert_eq!(map.gap_slot[5], Some(2));
        assert_eq!(map.token_slot, vec![Some(0), None, Some(1), None, Some(2)]);
    }

    #[test]
    fn template_length_mismatch_is_error() {
        let tags = TagSequence::all_keep(2);
        assert!(tags_to_template(&strings(&["a"]), &tags).is_err());
    }

    #[test]
    fn fill_examples() {
        let s = words("a b");
        let t = tags_to_template(&s, &TagSequence::all_keep(2)).unwrap();
        assert_eq!(fill_template(&t, &[]).unwrap(), s);

        let src = words(EX2_SRC);
        let tags = script_to_tags(&extract_edits(&src, &words(EX2_TGT), false));
        let t = tags_to_template(&src, &tags).unwrap();
        let filled = fill_template(&t, &[strings(&["плохие"])]).unwrap();
        assert_eq!(detokenize(&filled), "какие же эти люди плохие!");
        assert_eq!(filled, words(EX2_TGT));

        let t = Template { segments: vec![Segment::Mask(0), Segment::Literal(strings(&["x"]))] };
        assert_eq!(fill_template(&t, &[vec![]]).unwrap(), strings(&["x"]));
        assert!(matches!(fill_template(&t, &[]), Err(Error::Protocol { .. })));
        assert!(fill_template(&t, &[vec![], vec![]]).is_err());
    }

    #[test]
    fn record_roundtrips_through_json() {
        let script = extract_edits(&words(EX2_SRC), &words(EX2_TGT), false);
        let rec = EditRecord::new(EX2_SRC, EX2_TGT, &script);
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.contains(r#""tags":["KEEP","KEEP","KEEP","KEEP","REPLACE","KEEP","DELETE","DELETE"]"#));
        assert!(line.contains(r#"{"kind":"DELETE","src_start":6,"src_end":8,"repl":[]}"#));
        let back: EditRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.script(), script);
        assert_eq!(back.tag_sequence(), script_to_tags(&script));
    }

    fn token_list(max: usize) -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(String::from), 0..=max)
    }

    proptest! {
        #[test]
        fn minimal_and_replayable(s in token_list(6), t in token_list(6)) {
            let script = extract_edits(&s, &t, false);
            prop_assert_eq!(script.cost(), brute_distance(&s, &t));
            prop_assert_eq!(edit_distance(&s, &t, false), script.cost());
            prop_assert_eq!(apply_script(&s, &script).unwrap(), t);
        }

        #[test]
        fn scripts_are_canonical(s in token_list(12), t in token_list(12)) {
            let script = extract_edits(&s, &t, false);
            prop_assert!(script.validate(s.len()).is_ok());
            for pair in script.ops.windows(2) {
                prop_assert_ne!(pair[0].kind, pair[1].kind);
            }
            let again = extract_edits(&s, &t, false);
            prop_assert_eq!(
                serde_json::to_string(&EditRecord::new("", "", &script)).unwrap(),
                serde_json::to_string(&EditRecord::new("", "", &again)).unwrap()
            );
        }

        #[test]
        fn gold_fills_close_the_loop(s in token_list(10), t in token_list(10)) {
            let script = extract_edits(&s, &t, false);
            let tags = script_to_tags(&script);
            let (template, map) = template_with_slots(&s, &tags).unwrap();
            let fills = gold_fills(&script, &map, template.slot_count()).unwrap();
            prop_assert_eq!(fill_template(&template, &fills).unwrap(), t);
            prop_assert_eq!(template.slot_count() == 0, !tags.needs_generator());
        }
    }
}
