//! JSON-lines exchange with external model plugins.
//!
//! A plugin is either a shell command that reads one JSON request per line on
//! stdin and writes one JSON response per line on stdout, or a file of
//! precomputed responses. Responses carry the request `id` and may come back
//! in any order.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::thread;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{parse_jsonl, to_json};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PluginSource {
    /// Run through `sh -c`.
    Command(String),
    /// Responses read from a file; requests are not sent anywhere.
    Responses(PathBuf),
}

impl PluginSource {
    pub fn describe(&self) -> String {
        match self {
            PluginSource::Command(c) => format!("extern:{c}"),
            PluginSource::Responses(p) => format!("file:{}", p.display()),
        }
    }
}

/// Responses that can be matched back to their request.
pub trait Identified {
    fn id(&self) -> usize;
}

/// One plugin instance. Calls through the same instance are serialized.
#[derive(Debug)]
pub struct Plugin {
    source: PluginSource,
    lock: Mutex<()>,
}

impl Plugin {
    pub fn new(source: PluginSource) -> Self {
        Self { source, lock: Mutex::new(()) }
    }

    pub fn command(cmd: impl Into<String>) -> Self {
        Self::new(PluginSource::Command(cmd.into()))
    }

    pub fn responses(path: impl Into<PathBuf>) -> Self {
        Self::new(PluginSource::Responses(path.into()))
    }

    pub fn name(&self) -> String {
        self.source.describe()
    }

    fn raw_exchange(&self, payload: String) -> Result<String> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        match &self.source {
            PluginSource::Responses(path) => std::fs::read_to_string(path).map_err(|e| Error::io(path, e)),
            PluginSource::Command(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::piped())
                    .spawn()
                    .map_err(|e| Error::protocol(self.name(), None, format!("cannot start: {e}")))?;
                let mut stdin = child.stdin.take().expect("piped stdin");
                let writer = thread::spawn(move || {
                    // a plugin may exit without draining stdin; that surfaces
                    // as a response-count error below
                    let _ = stdin.write_all(payload.as_bytes());
                });
                let mut stdout = String::new();
                for line in BufReader::new(child.stdout.take().expect("piped stdout")).lines() {
                    let line = line.map_err(|e| Error::protocol(self.name(), None, e.to_string()))?;
                    stdout.push_str(&line);
                    stdout.push('\n');
                }
                let output = child
                    .wait_with_output()
                    .map_err(|e| Error::protocol(self.name(), None, e.to_string()))?;
                let _ = writer.join();
                if !output.status.success() {
                    return Err(Error::protocol(
                        self.name(),
                        None,
                        format!("exited with {}: {}", output.status, String::from_utf8_lossy(&output.stderr).trim()),
                    ));
                }
                Ok(stdout)
            }
        }
    }

    /// Sends `requests` and returns responses reordered to request order.
    pub fn exchange<Q: Serialize, R: DeserializeOwned + Identified>(&self, requests: &[Q]) -> Result<Vec<(usize, R)>> {
        let mut payload = String::new();
        for r in requests {
            payload.push_str(&to_json(r));
            payload.push('\n');
        }
        let text = self.raw_exchange(payload)?;
        let parsed: Vec<(usize, R)> = parse_jsonl(&self.name(), &text).map_err(|e| match e {
            Error::Schema { line, message, .. } => Error::protocol(self.name(), Some(line), message),
            other => other,
        })?;
        match_ids(&self.name(), parsed, requests.len())
    }
}

/// Places each response at its request index; every id must appear once.
pub fn match_ids<R: Identified>(plugin: &str, parsed: Vec<(usize, R)>, expected: usize) -> Result<Vec<(usize, R)>> {
    let mut slots: Vec<Option<(usize, R)>> = (0..expected).map(|_| None).collect();
    for (line, resp) in parsed {
        let id = resp.id();
        match slots.get_mut(id) {
            None => return Err(Error::protocol(plugin, Some(line), format!("unknown id {id}"))),
            Some(Some(_)) => return Err(Error::protocol(plugin, Some(line), format!("duplicate id {id}"))),
            Some(slot) => *slot = Some((line, resp)),
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(id, s)| s.ok_or_else(|| Error::protocol(plugin, None, format!("no response for id {id}"))))
        .collect()
}
