use serde::{Deserialize, Serialize};

use super::Tagger;
use crate::edit::{Tag, TagSequence};
use crate::error::{Error, Result};
use crate::plugin::{Identified, Plugin, PluginSource};
use crate::text::detokenize;

/// One sentence sent to an external tagger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagRequest {
    pub id: usize,
    pub source: String,
    pub tokens: Vec<String>,
}

/// Tag record returned by an external tagger; extra fields are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagResponse {
    pub id: usize,
    pub tags: Vec<Tag>,
    pub gaps: Vec<u8>,
}

impl Identified for TagResponse {
    fn id(&self) -> usize {
        self.id
    }
}

/// Tagger hosted by an external process or a file of precomputed records.
#[derive(Debug)]
pub struct ExternalTagger {
    plugin: Plugin,
}

impl ExternalTagger {
    pub fn new(source: PluginSource) -> Self {
        Self { plugin: Plugin::new(source) }
    }
}

impl Tagger for ExternalTagger {
    fn name(&self) -> String {
        self.plugin.name()
    }

    fn tag_batch(&self, sentences: &[Vec<String>]) -> Result<Vec<TagSequence>> {
        let requests: Vec<TagRequest> = sentences
            .iter()
            .enumerate()
            .map(|(id, tokens)| TagRequest { id, source: detokenize(tokens), tokens: tokens.clone() })
            .collect();
        let responses = self.plugin.exchange::<_, TagResponse>(&requests)?;
        responses
            .into_iter()
            .zip(sentences)
            .map(|((line, resp), tokens)| {
                if let Some(bad) = resp.gaps.iter().find(|&&g| g > 1) {
                    return Err(Error::protocol(self.name(), Some(line), format!("gap marker {bad} is not 0 or 1")));
                }
                let tags = TagSequence { token_tags: resp.tags, gap_insert: resp.gaps.iter().map(|&g| g == 1).collect() };
                tags.check_len(tokens.len())
                    .map_err(|m| Error::protocol(self.name(), Some(line), format!("id {}: {m}", resp.id)))?;
                Ok(tags)
            })
            .collect()
    }
}
