//! End-to-end detoxification: tokenize, tag, fill the masked template when
//! the tags call for it, detokenize.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::edit::{fill_template, TagSequence, Template};
use crate::error::{Error, Result};
use crate::generator::{FillRequest, Fills, Generator};
use crate::io;
use crate::tagger::Tagger;
use crate::text::{detokenize, tokenize_words};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineResult {
    pub output: String,
    pub tags: TagSequence,
    pub template: Template,
    pub generator_invoked: bool,
    pub fills: Fills,
}

/// Scores a candidate rewrite of `source`; higher is better.
pub type RerankFn = dyn Fn(&str, &str) -> f64 + Send + Sync;

pub struct Pipeline<'a> {
    pub tagger: &'a dyn Tagger,
    pub generator: &'a dyn Generator,
    /// Picks among generator hypotheses when set. Off by default: ranking by
    /// automatic metrics tends to favor outputs that game those metrics.
    pub rerank: Option<&'a RerankFn>,
    /// Sentences per tagger/generator call.
    pub chunk_size: usize,
}

impl<'a> Pipeline<'a> {
    pub fn new(tagger: &'a dyn Tagger, generator: &'a dyn Generator) -> Self {
        Self { tagger, generator, rerank: None, chunk_size: 512 }
    }

    pub fn run(&self, text: &str) -> Result<PipelineResult> {
        let mut out = self.run_batch(&[text.to_owned()])?;
        Ok(out.pop().expect("one result per input"))
    }

    /// Detoxifies `texts`, preserving order.
    pub fn run_batch(&self, texts: &[String]) -> Result<Vec<PipelineResult>> {
        let mut results = Vec::with_capacity(texts.len());
        for (chunk_idx, chunk) in texts.chunks(self.chunk_size.max(1)).enumerate() {
            let offset = chunk_idx * self.chunk_size.max(1);
            results.extend(self.run_chunk(chunk, offset)?);
        }
        Ok(results)
    }

    fn run_chunk(&self, texts: &[String], offset: usize) -> Result<Vec<PipelineResult>> {
        let tokens: Vec<Vec<String>> = texts.iter().map(|t| tokenize_words(t)).collect();
        let tags = self.tagger.tag_batch(&tokens)?;
        if tags.len() != tokens.len() {
            return Err(Error::protocol(
                self.tagger.name(),
                None,
                format!("{} tag sequences for {} sentences", tags.len(), tokens.len()),
            ));
        }

        let mut requests = Vec::with_capacity(texts.len());
        for (i, (toks, t)) in tokens.iter().zip(&tags).enumerate() {
            t.check_len(toks.len())
                .map_err(|m| Error::protocol(self.tagger.name(), None, m).at_input(offset + i))?;
            requests.push(FillRequest::from_tags(toks, t).map_err(|e| e.at_input(offset + i))?);
        }

        let pending: Vec<usize> = (0..requests.len()).filter(|&i| requests[i].slot_count() > 0).collect();
        let to_fill: Vec<FillRequest> = pending.iter().map(|&i| requests[i].clone()).collect();
        let mut fills: Vec<Option<Fills>> = vec![None; requests.len()];
        if !to_fill.is_empty() {
            let chosen = match self.rerank {
                None => self.generator.fill_batch(&to_fill)?,
                Some(score) => {
                    let cands = self.generator.candidates(&to_fill)?;
                    cands
                        .into_iter()
                        .zip(&to_fill)
                        .enumerate()
                        .map(|(k, (c, req))| pick_best(&texts[pending[k]], req, c, score).map_err(|e| e.at_input(offset + pending[k])))
                        .collect::<Result<Vec<_>>>()?
                }
            };
            if chosen.len() != to_fill.len() {
                return Err(Error::protocol(
                    self.generator.name(),
                    None,
                    format!("{} fill sets for {} requests", chosen.len(), to_fill.len()),
                ));
            }
            for (i, f) in pending.into_iter().zip(chosen) {
                fills[i] = Some(f);
            }
        }

        requests
            .into_iter()
            .zip(tags)
            .zip(fills)
            .enumerate()
            .map(|(i, ((req, tags), fills))| {
                let generator_invoked = fills.is_some();
                let fills = fills.unwrap_or_default();
                let words = fill_template(&req.template, &fills).map_err(|e| e.at_input(offset + i))?;
                Ok(PipelineResult { output: detokenize(&words), tags, template: req.template, generator_invoked, fills })
            })
            .collect()
    }
}

fn pick_best(source: &str, req: &FillRequest, candidates: Vec<Fills>, score: &RerankFn) -> Result<Fills> {
    let mut best: Option<(f64, Fills)> = None;
    for fills in candidates {
        let output = detokenize(&fill_template(&req.template, &fills)?);
        let s = score(source, &output);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, fills));
        }
    }
    best.map(|(_, f)| f).ok_or_else(|| Error::protocol("generator", None, "no hypotheses returned"))
}

/// Convenience wrapper around [`Pipeline::run`].
pub fn detoxify(text: &str, tagger: &dyn Tagger, generator: &dyn Generator) -> Result<PipelineResult> {
    Pipeline::new(tagger, generator).run(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sentences: usize,
    pub generator_invoked: usize,
    pub generator_skipped: usize,
    /// Fraction of sentences that needed no generator call; `None` for an
    /// empty input.
    pub skip_rate: Option<f64>,
}

impl RunSummary {
    pub fn from_results(results: &[PipelineResult]) -> Self {
        let invoked = results.iter().filter(|r| r.generator_invoked).count();
        let skipped = results.len() - invoked;
        Self {
            sentences: results.len(),
            generator_invoked: invoked,
            generator_skipped: skipped,
            skip_rate: (!results.is_empty()).then(|| skipped as f64 / results.len() as f64),
        }
    }
}

/// Reads one sentence per line from `input`, writes one output per line.
pub fn detoxify_batch(input: &Path, output: &Path, pipeline: &Pipeline<'_>) -> Result<RunSummary> {
    let lines = io::read_lines(input)?;
    let results = pipeline.run_batch(&lines)?;
    let mut w = io::create(output)?;
    for (written, r) in results.iter().enumerate() {
        writeln!(w, "{}", r.output).map_err(|e| partial(output, e, written, results.len()))?;
    }
    w.flush().map_err(|e| partial(output, e, results.len(), results.len()))?;
    Ok(RunSummary::from_results(&results))
}

fn partial(path: &Path, e: std::io::Error, written: usize, total: usize) -> Error {
    Error::io(
        path,
        std::io::Error::new(e.kind(), format!("{e} (partial output: {written} of {total} lines written)")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit::{extract_edits, script_to_tags, Tag};
    use crate::generator::{DeleteGenerator, LexiconGenerator, Lexicon};
    use crate::tagger::KeepTagger;

    /// Replays fixed tag sequences.
    struct FixedTagger(Vec<TagSequence>);

    impl Tagger for FixedTagger {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn tag_batch(&self, sentences: &[Vec<String>]) -> Result<Vec<TagSequence>> {
            Ok(self.0.iter().take(sentences.len()).cloned().collect())
        }
    }

    /// Always returns the same fills.
    struct FixedGenerator(Fills);

    impl Generator for FixedGenerator {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn fill_batch(&self, requests: &[FillRequest]) -> Result<Vec<Fills>> {
            Ok(requests.iter().map(|_| self.0.clone()).collect())
        }
    }

    #[test]
    fn all_keep_is_identity() {
        let r = detoxify("какие же эти люди сволочи!!!", &KeepTagger, &DeleteGenerator).unwrap();
        assert_eq!(r.output, "какие же эти люди сволочи!!!");
        assert!(!r.generator_invoked);
    }

    #[test]
    fn gold_tags_and_fills_reproduce_reference() {
        let src = "сколько же е**нутых в россии в месте с тобой";
        let tgt = "сколько же неадекватных в россии в месте с тобой";
        let tags = script_to_tags(&extract_edits(&tokenize_words(src), &tokenize_words(tgt), false));
        let r = detoxify(src, &FixedTagger(vec![tags]), &FixedGenerator(vec![vec!["неадекватных".into()]])).unwrap();
        assert_eq!(r.output, tgt);
        assert!(r.generator_invoked);
    }

    #[test]
    fn delete_only_skips_generator() {
        let src = "Только хотел спросить, что за завалы. Е**ть хреновые в Рашке плотники";
        let toks = tokenize_words(src);
        let mut tags = TagSequence::all_keep(toks.len());
        let start = toks.iter().position(|t| t == "Е**ть").unwrap();
        tags.token_tags[start] = Tag::Delete;
        tags.token_tags[start + 1] = Tag::Delete;
        // a generator that would corrupt the output if it were called
        let r = detoxify(src, &FixedTagger(vec![tags]), &FixedGenerator(vec![vec!["X".into()]])).unwrap();
        assert!(!r.generator_invoked);
        assert_eq!(r.output, "Только хотел спросить, что за завалы. в Рашке плотники");
    }

    #[test]
    fn fill_count_errors_name_the_input() {
        let toks = tokenize_words("a b");
        let tags = TagSequence { token_tags: vec![Tag::Replace, Tag::Keep], gap_insert: vec![false; 3] };
        let tagger = FixedTagger(vec![TagSequence::all_keep(1), tags]);
        let generator = FixedGenerator(vec![]);
        let p = Pipeline::new(&tagger, &generator);
        let err = p.run_batch(&["x".into(), detokenize(&toks)]).unwrap_err();
        assert!(matches!(err, Error::AtInput { id: 1, .. }), "{err}");
    }

    #[test]
    fn reranking_picks_highest_score() {
        struct Multi;
        impl Generator for Multi {
            fn name(&self) -> String {
                "multi".into()
            }
            fn fill_batch(&self, r: &[FillRequest]) -> Result<Vec<Fills>> {
                Ok(self.candidates(r)?.into_iter().map(|mut c| c.remove(0)).collect())
            }
            fn candidates(&self, r: &[FillRequest]) -> Result<Vec<Vec<Fills>>> {
                Ok(r.iter().map(|_| vec![vec![vec!["short".into()]], vec![vec!["much".into(), "longer".into()]]]).collect())
            }
        }
        let tags = TagSequence { token_tags: vec![Tag::Replace], gap_insert: vec![false; 2] };
        let tagger = FixedTagger(vec![tags]);
        let score = |_: &str, out: &str| out.len() as f64;
        let mut p = Pipeline::new(&tagger, &Multi);
        assert_eq!(p.run("x").unwrap().output, "short");
        p.rerank = Some(&score);
        assert_eq!(p.run("x").unwrap().output, "much longer");
    }

    #[test]
    fn batch_file_summary() {
        let dir = tempfile::tempdir().unwrap();
        let (input, output) = (dir.path().join("in.txt"), dir.path().join("out.txt"));
        std::fs::write(&input, "").unwrap();
        let p = Pipeline::new(&KeepTagger, &DeleteGenerator);
        let s = detoxify_batch(&input, &output, &p).unwrap();
        assert_eq!(s.skip_rate, None);
        assert_eq!(std::fs::read_to_string(&output).unwrap(), "");

        std::fs::write(&input, "a ,b\n\nc!\n").unwrap();
        let s = detoxify_batch(&input, &output, &p).unwrap();
        assert_eq!(s.skip_rate, Some(1.0));
        assert_eq!(std::fs::read_to_string(&output).unwrap(), "a, b\n\nc!\n");
    }

    #[test]
    fn lexicon_generator_in_pipeline() {
        let src = "какие же эти люди сволочи!!!";
        let tags = script_to_tags(&extract_edits(
            &tokenize_words(src),
            &tokenize_words("какие же эти люди плохие !"),
            false,
        ));
        let gen = LexiconGenerator { lexicon: Lexicon::parse("m", "сволочи\tплохие люди\n").unwrap() };
        let r = detoxify(src, &FixedTagger(vec![tags]), &gen).unwrap();
        assert_eq!(r.output, "какие же эти люди плохие люди!");
    }
}
