//! File helpers shared by the CLI and the corpus loaders: JSON-lines with a
//! leading metadata record, input digests, line readers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "detoxkit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance header embedded in every file the toolkit writes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
}

impl Meta {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: TOOL_NAME.to_owned(),
            version: TOOL_VERSION.to_owned(),
            command: command.to_owned(),
            seed,
            inputs: Vec::new(),
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: digest_file(path)? });
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: Meta,
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Reads all lines, stripping a trailing `\r`.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let mut line = line.map_err(|e| Error::io(path, e))?;
        if line.ends_with('\r') {
            line.pop();
        }
        out.push(line);
    }
    Ok(out)
}

/// Parses one record per non-empty line, skipping a leading metadata line.
/// Returned pairs carry the 1-based line number.
pub fn parse_jsonl<T: DeserializeOwned>(origin: &str, text: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if out.is_empty() && idx == 0 && serde_json::from_str::<MetaLine>(line).is_ok() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::schema(origin, idx + 1, e.to_string()))?;
        out.push((idx + 1, rec));
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&path.display().to_string(), &text)
}

/// Writes `meta` as the first line, then one JSON object per record.
pub fn write_jsonl<T: Serialize>(path: &Path, meta: &Meta, records: &[T]) -> Result<()> {
    let mut w = create(path)?;
    let put = |w: &mut BufWriter<File>, s: String| writeln!(w, "{s}").map_err(|e| Error::io(path, e));
    put(&mut w, to_json(&MetaLine { meta: meta.clone() }))?;
    for r in records {
        put(&mut w, to_json(r))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON document with the metadata stored under `meta`.
pub fn write_json_with_meta<T: Serialize>(path: &Path, meta: &Meta, body: &T) -> Result<()> {
    let mut value = serde_json::to_value(body).expect("serializable body");
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("meta".to_owned(), serde_json::to_value(meta).expect("serializable meta"));
    }
    let text = serde_json::to_string_pretty(&value).expect("serializable value");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::schema(path.display().to_string(), e.line(), e.to_string()))
}

/// Sidecar path holding metadata for plain-text outputs.
pub fn meta_sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("record types serialize infallibly")
}
