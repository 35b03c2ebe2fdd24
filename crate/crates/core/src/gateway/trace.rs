use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResult, GatewayError, TokenUsage};

/// Request-time settings kept alongside a recorded completion; not part of the tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub max_tokens: u32,
    pub temperature: f64,
    pub backend: String,
    pub latency_ms: u64,
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tag: String,
    pub model_id: String,
    pub prompt: String,
    pub stops: Vec<String>,
    pub completion: String,
    pub recorded_at: String,
    #[serde(default)]
    pub token_usage: Option<TokenUsage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<RecordMeta>,
}

impl TraceRecord {
    pub fn new(request: &CompletionRequest, result: &CompletionResult) -> Self {
        Self {
            tag: request.request_tag.clone(),
            model_id: request.model_id.clone(),
            prompt: request.prompt.clone(),
            stops: request.stop_sequences.clone(),
            completion: result.text.clone(),
            recorded_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            token_usage: result.token_usage,
            meta: Some(RecordMeta {
                max_tokens: request.max_tokens,
                temperature: request.temperature,
                backend: result.backend.as_str().to_string(),
                latency_ms: result.latency_ms,
            }),
        }
    }
}

fn storage(path: &Path, e: impl std::fmt::Display) -> GatewayError {
    GatewayError::StorageFailure(format!("{}: {e}", path.display()))
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRecord>, GatewayError> {
    let file = File::open(path).map_err(|e| storage(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| storage(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord =
            serde_json::from_str(&line).map_err(|e| storage(path, format!("line {}: {e}", i + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Read-only tag → record index over one or more trace files.
#[derive(Debug, Clone, Default)]
pub struct ReplayStore {
    records: HashMap<String, TraceRecord>,
    digest: String,
}

impl ReplayStore {
    /// Indexes records; the first record for a tag wins.
    pub fn from_records(records: impl IntoIterator<Item = TraceRecord>) -> Self {
        let mut map = HashMap::new();
        let mut tags = Vec::new();
        for r in records {
            if !map.contains_key(&r.tag) {
                tags.push(format!("{}={}", r.tag, crate::digest::sha256_hex(r.completion.as_bytes())));
                map.insert(r.tag.clone(), r);
            }
        }
        tags.sort();
        Self {
            records: map,
            digest: crate::digest::sha256_hex(tags.join("\n").as_bytes()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self::from_records(read_trace_file(path)?))
    }

    pub fn get(&self, tag: &str) -> Option<&TraceRecord> {
        self.records.get(tag)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Content digest over (tag, completion) pairs, independent of file order.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}

/// Append-only sink for one recording session.
pub struct Recorder {
    path: PathBuf,
    writer: BufWriter<File>,
    entries: usize,
}

impl Recorder {
    /// Creates (or truncates) the trace file so a zero-call session still
    /// leaves a valid, empty store behind.
    pub fn create(path: &Path) -> Result<Self, GatewayError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| storage(parent, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| storage(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
            entries: 0,
        })
    }

    pub fn append(&mut self, record: &TraceRecord) -> Result<(), GatewayError> {
        let line = serde_json::to_string(record).map_err(|e| storage(&self.path, e))?;
        writeln!(self.writer, "{line}").map_err(|e| storage(&self.path, e))?;
        // flush per entry so a crashed run keeps what it paid for
        self.writer.flush().map_err(|e| storage(&self.path, e))?;
        self.entries += 1;
        Ok(())
    }

    pub fn entries(&self) -> usize {
        self.entries
    }

    pub fn finish(mut self) -> Result<PathBuf, GatewayError> {
        self.writer.flush().map_err(|e| storage(&self.path, e))?;
        self.writer.get_ref().sync_all().map_err(|e| storage(&self.path, e))?;
        Ok(self.path)
    }
}
