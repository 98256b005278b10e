//! Second pipeline step: producing fills for template mask slots.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{generator_input, ConcatOrder};
use crate::edit::{template_with_slots, TagSequence, Template};
use crate::error::{Error, Result};
use crate::plugin::{Identified, Plugin, PluginSource};
use crate::text::{detokenize, fold_key, tokenize_words};

/// Per-slot fill tokens for one template.
pub type Fills = Vec<Vec<String>>;

/// Everything a generator sees for one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillRequest {
    pub template: Template,
    pub source_tokens: Vec<String>,
    /// Original tokens hidden behind each slot, in slot order.
    pub masked_spans: Vec<Vec<String>>,
}

impl FillRequest {
    pub fn from_tags(source_tokens: &[String], tags: &TagSequence) -> Result<Self> {
        let (template, map) = template_with_slots(source_tokens, tags)?;
        let mut masked_spans = vec![Vec::new(); template.slot_count()];
        for (token, slot) in source_tokens.iter().zip(&map.token_slot) {
            if let Some(s) = slot {
                masked_spans[*s].push(token.clone());
            }
        }
        Ok(Self { template, source_tokens: source_tokens.to_vec(), masked_spans })
    }

    pub fn slot_count(&self) -> usize {
        self.masked_spans.len()
    }
}

pub trait Generator: Send + Sync {
    fn name(&self) -> String;

    fn fill_batch(&self, requests: &[FillRequest]) -> Result<Vec<Fills>>;

    /// Alternative fills per request, best first. Only generators that can
    /// produce several hypotheses override this.
    fn candidates(&self, requests: &[FillRequest]) -> Result<Vec<Vec<Fills>>> {
        Ok(self.fill_batch(requests)?.into_iter().map(|f| vec![f]).collect())
    }
}

/// Fills every slot with nothing, turning the template into a pure deletion.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeleteGenerator;

pub fn fill_delete(request: &FillRequest) -> Fills {
    vec![Vec::new(); request.slot_count()]
}

impl Generator for DeleteGenerator {
    fn name(&self) -> String {
        "delete".into()
    }

    fn fill_batch(&self, requests: &[FillRequest]) -> Result<Vec<Fills>> {
        Ok(requests.iter().map(fill_delete).collect())
    }
}

/// Toxic word → neutral replacements. An empty replacement list deletes.
/// Keys are matched in folded form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn insert(&mut self, key: &str, replacements: Vec<String>) -> Result<()> {
        let key = fold_key(key.trim());
        if key.is_empty() {
            return Err(Error::Invalid("lexicon keys must be non-empty".into()));
        }
        self.entries.insert(key, replacements);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[String]> {
        self.entries.get(&fold_key(token)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// TSV: `word \t replacement \t replacement ...`; a bare word maps to
    /// deletion.
    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let key = cols.next().unwrap_or_default();
            let repl = cols.map(str::trim).filter(|c| !c.is_empty()).map(str::to_owned).collect();
            lex.insert(key, repl).map_err(|e| Error::schema(origin, idx + 1, e.to_string()))?;
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }
}

/// For each slot, the first replacement of the leftmost masked token found
/// in the lexicon; empty when none matches.
pub fn fill_lexicon(request: &FillRequest, lexicon: &Lexicon) -> Fills {
    request
        .masked_spans
        .iter()
        .map(|span| {
            span.iter()
                .find_map(|t| lexicon.get(t))
                .and_then(|repl| repl.first())
                .map(|r| tokenize_words(r))
                .unwrap_or_default()
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct LexiconGenerator {
    pub lexicon: Lexicon,
}

impl Generator for LexiconGenerator {
    fn name(&self) -> String {
        "lexicon".into()
    }

    fn fill_batch(&self, requests: &[FillRequest]) -> Result<Vec<Fills>> {
        Ok(requests.iter().map(|r| fill_lexicon(r, &self.lexicon)).collect())
    }
}

/// Wire form of a fill request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillRecord {
    pub id: usize,
    pub template: String,
    pub source: String,
    pub masked_spans: Vec<Vec<String>>,
    /// Template and source joined with the separator, ready for a
    /// sequence-to-sequence model.
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillResponse {
    pub id: usize,
    pub fills: Vec<String>,
    /// Further hypotheses after `fills`, best first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hypotheses: Vec<Vec<String>>,
}

impl Identified for FillResponse {
    fn id(&self) -> usize {
        self.id
    }
}

#[derive(Debug)]
pub struct ExternalGenerator {
    plugin: Plugin,
    pub order: ConcatOrder,
}

impl ExternalGenerator {
    pub fn new(source: PluginSource, order: ConcatOrder) -> Self {
        Self { plugin: Plugin::new(source), order }
    }

    pub fn record(&self, id: usize, request: &FillRequest) -> FillRecord {
        let template = request.template.render();
        let source = detokenize(&request.source_tokens);
        FillRecord {
            id,
            input: generator_input(&template, &source, self.order),
            template,
            source,
            masked_spans: request.masked_spans.clone(),
        }
    }
}

impl Generator for ExternalGenerator {
    fn name(&self) -> String {
        self.plugin.name()
    }

    fn fill_batch(&self, requests: &[FillRequest]) -> Result<Vec<Fills>> {
        Ok(self.candidates(requests)?.into_iter().map(|mut c| c.swap_remove(0)).collect())
    }

    fn candidates(&self, requests: &[FillRequest]) -> Result<Vec<Vec<Fills>>> {
        let records: Vec<FillRecord> = requests.iter().enumerate().map(|(i, r)| self.record(i, r)).collect();
        let responses = self.plugin.exchange::<_, FillResponse>(&records)?;
        responses
            .into_iter()
            .zip(requests)
            .map(|((line, resp), req)| {
                std::iter::once(resp.fills)
                    .chain(resp.hypotheses)
                    .map(|fills| {
                        if fills.len() != req.slot_count() {
                            return Err(Error::protocol(
                                self.name(),
                                Some(line),
                                format!("id {}: {} fills for {} slots", resp.id, fills.len(), req.slot_count()),
                            ));
                        }
                        Ok(fills.iter().map(|f| tokenize_words(f)).collect())
                    })
                    .collect()
            })
            .collect()
    }
}
