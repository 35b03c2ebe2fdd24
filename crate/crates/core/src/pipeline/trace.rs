use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Claim, PipelineError};
use crate::fol::TruthValue;
use crate::gateway::CompletionResult;
use crate::grounding::GroundedQA;
use crate::label::{Label, Strategy};
use crate::prompt::{Decomposition, ParsedVerdict, Phase};

pub const TRACE_SCHEMA: &str = "folk-trace/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyFlag {
    Consistent,
    LabelClauseMismatch,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Decompose,
    Grounding,
    Reason,
    Timeout,
    Setup,
}

/// A failure captured inside a trace instead of aborting the batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceError {
    pub stage: Stage,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub phase: Phase,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub decompose_ms: u64,
    pub grounding_ms: u64,
    pub reason_ms: u64,
    pub total_ms: u64,
}

/// Complete record of one verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictTrace {
    pub claim: Claim,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub decomposition: Decomposition,
    pub grounded: Vec<GroundedQA>,
    pub prompts: Vec<PromptRecord>,
    pub completions: Vec<CompletionResult>,
    pub parsed: ParsedVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clause_value: Option<TruthValue>,
    pub final_label: Label,
    pub consistency_flag: ConsistencyFlag,
    pub citations: Vec<String>,
    pub timings: StageTimings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<TraceError>,
}

impl VerdictTrace {
    /// Zeroes every wall-clock field so traces from different runs compare equal.
    pub fn normalize_timings(&mut self) {
        self.timings = StageTimings::default();
        for c in &mut self.completions {
            c.latency_ms = 0;
        }
    }

    pub fn has_error_kind(&self, kind: &str) -> bool {
        self.errors.iter().any(|e| e.kind == kind)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Distinct source URLs in first-seen order.
pub fn citations_of(grounded: &[GroundedQA]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for qa in grounded {
        if !qa.source_url.is_empty() && !out.contains(&qa.source_url) {
            out.push(qa.source_url.clone());
        }
    }
    out
}

/// First line of a run file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub claim_count: usize,
    pub config_digest: String,
    pub fixture_digests: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub manifest: RunManifest,
    pub traces: Vec<VerdictTrace>,
}

impl BatchOutput {
    pub fn normalize_timings(&mut self) {
        self.traces.iter_mut().for_each(VerdictTrace::normalize_timings);
    }

    /// Manifest line followed by one line per trace.
    pub fn to_ndjson(&self) -> String {
        let mut out = serde_json::to_string(&self.manifest).expect("manifest serializes");
        out.push('\n');
        for t in &self.traces {
            out.push_str(&t.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        let io = |e: std::io::Error| PipelineError::Storage(format!("{}: {e}", path.display()));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(self.to_ndjson().as_bytes()).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let fail = |line: usize, e: String| PipelineError::Storage(format!("{}:{line}: {e}", path.display()));
        let file = File::open(path).map_err(|e| fail(0, e.to_string()))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let manifest: RunManifest = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line.map_err(|e| fail(i + 1, e.to_string()))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line).map_err(|e| fail(i + 1, format!("manifest: {e}")))?;
                }
                None => return Err(fail(0, "empty run file".into())),
            }
        };
        if manifest.schema != TRACE_SCHEMA {
            return Err(fail(1, format!("unsupported schema `{}`", manifest.schema)));
        }
        let mut traces = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| fail(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            traces.push(serde_json::from_str(&line).map_err(|e| fail(i + 1, e.to_string()))?);
        }
        Ok(Self { manifest, traces })
    }
}
