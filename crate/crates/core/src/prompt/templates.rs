use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::label::Strategy;

/// Line delimiting few-shot examples.
pub const EXAMPLE_SEPARATOR: &str = "------";
/// Line after which the model is expected to respond.
pub const RESPONSE_CUE: &str = ">>>>>>";
pub const CLAIM_SLOT: &str = "{claim}";
pub const CONTEXT_SLOT: &str = "{context}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Decompose,
    Reason,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Decompose => "decompose",
            Self::Reason => "reason",
        })
    }
}

/// The six shipped prompt assets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateKind {
    CotDecompose,
    FolkDecompose,
    DirectReasoning,
    CotReasoning,
    SelfAskReasoning,
    FolkReasoning,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 6] = [
        Self::CotDecompose,
        Self::FolkDecompose,
        Self::DirectReasoning,
        Self::CotReasoning,
        Self::SelfAskReasoning,
        Self::FolkReasoning,
    ];

    /// Asset file stem.
    pub fn file_stem(self) -> &'static str {
        match self {
            Self::CotDecompose => "cot_decompose",
            Self::FolkDecompose => "folk_decompose",
            Self::DirectReasoning => "direct_reasoning",
            Self::CotReasoning => "cot_reasoning",
            Self::SelfAskReasoning => "self_ask_reasoning",
            Self::FolkReasoning => "folk_reasoning",
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Self::CotDecompose | Self::CotReasoning => Strategy::Cot,
            Self::FolkDecompose | Self::FolkReasoning => Strategy::Folk,
            Self::DirectReasoning => Strategy::Direct,
            Self::SelfAskReasoning => Strategy::SelfAsk,
        }
    }

    pub fn phase(self) -> Phase {
        match self {
            Self::CotDecompose | Self::FolkDecompose => Phase::Decompose,
            _ => Phase::Reason,
        }
    }

    /// Template used by `strategy` in `phase`. Self-Ask shares the CoT
    /// decomposition; Direct has none.
    pub fn for_phase(strategy: Strategy, phase: Phase) -> Option<Self> {
        match (strategy, phase) {
            (Strategy::Cot | Strategy::SelfAsk, Phase::Decompose) => Some(Self::CotDecompose),
            (Strategy::Folk, Phase::Decompose) => Some(Self::FolkDecompose),
            (Strategy::Direct, Phase::Decompose) => None,
            (Strategy::Direct, Phase::Reason) => Some(Self::DirectReasoning),
            (Strategy::Cot, Phase::Reason) => Some(Self::CotReasoning),
            (Strategy::SelfAsk, Phase::Reason) => Some(Self::SelfAskReasoning),
            (Strategy::Folk, Phase::Reason) => Some(Self::FolkReasoning),
        }
    }

    fn builtin_asset(self) -> &'static str {
        match self {
            Self::CotDecompose => include_str!("../../templates/cot_decompose.txt"),
            Self::FolkDecompose => include_str!("../../templates/folk_decompose.txt"),
            Self::DirectReasoning => include_str!("../../templates/direct_reasoning.txt"),
            Self::CotReasoning => include_str!("../../templates/cot_reasoning.txt"),
            Self::SelfAskReasoning => include_str!("../../templates/self_ask_reasoning.txt"),
            Self::FolkReasoning => include_str!("../../templates/folk_reasoning.txt"),
        }
    }
}

/// A few-shot completion prompt split into its parts.
///
/// The asset layout is: a preamble ending in a blank line, then examples
/// separated by `------` lines, then a final query block holding the
/// `{claim}` (and optionally `{context}`) slots and ending with the `>>>>>>`
/// response cue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: TemplateKind,
    pub preamble: String,
    pub shots: Vec<String>,
    pub example_separator: String,
    pub response_cue: String,
    pub query: String,
}

impl PromptTemplate {
    pub fn parse(kind: TemplateKind, asset: &str) -> Result<Self, PromptError> {
        let bad = |reason: &str| PromptError::TemplateAsset {
            name: kind.file_stem().to_string(),
            reason: reason.to_string(),
        };
        let split = asset.find("\n\n").ok_or_else(|| bad("no blank line after the preamble"))?;
        let (preamble, body) = asset.split_at(split + 2);
        let delimiter = format!("\n{EXAMPLE_SEPARATOR}\n");
        let mut blocks: Vec<String> = body.split(&delimiter).map(str::to_string).collect();
        let query = blocks.pop().unwrap_or_default();
        if blocks.is_empty() {
            return Err(bad("no few-shot examples"));
        }
        if query.matches(CLAIM_SLOT).count() != 1 {
            return Err(bad("query block must contain exactly one {claim} slot"));
        }
        if query.matches(CONTEXT_SLOT).count() > 1 {
            return Err(bad("query block has more than one {context} slot"));
        }
        if !query.ends_with(&format!("{RESPONSE_CUE}\n")) {
            return Err(bad("query block must end with the response cue line"));
        }
        if kind.phase() == Phase::Decompose && query.contains(CONTEXT_SLOT) {
            return Err(bad("decomposition templates take no {context} slot"));
        }
        Ok(Self {
            kind,
            preamble: preamble.to_string(),
            shots: blocks,
            example_separator: EXAMPLE_SEPARATOR.to_string(),
            response_cue: RESPONSE_CUE.to_string(),
            query,
        })
    }

    pub fn has_context_slot(&self) -> bool {
        self.query.contains(CONTEXT_SLOT)
    }

    /// Renders the prompt with the slots filled verbatim. Slot values are not
    /// re-scanned for placeholders.
    pub fn render(&self, claim: &str, context: &str) -> String {
        let delimiter = format!("\n{}\n", self.example_separator);
        let mut out = String::with_capacity(
            self.preamble.len() + self.shots.iter().map(|s| s.len() + 8).sum::<usize>() + self.query.len() + claim.len() + context.len(),
        );
        out.push_str(&self.preamble);
        for shot in &self.shots {
            out.push_str(shot);
            out.push_str(&delimiter);
        }
        let mut rest = self.query.as_str();
        while let Some(pos) = rest.find('{') {
            out.push_str(&rest[..pos]);
            let tail = &rest[pos..];
            if let Some(after) = tail.strip_prefix(CLAIM_SLOT) {
                out.push_str(claim);
                rest = after;
            } else if let Some(after) = tail.strip_prefix(CONTEXT_SLOT) {
                out.push_str(context);
                rest = after;
            } else {
                out.push('{');
                rest = &tail[1..];
            }
        }
        out.push_str(rest);
        out
    }
}

/// All six templates, loaded once.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<PromptTemplate>,
}

impl TemplateSet {
    /// Templates compiled into the crate from `templates/`.
    pub fn builtin() -> Self {
        let templates = TemplateKind::ALL
            .iter()
            .map(|&kind| {
                PromptTemplate::parse(kind, kind.builtin_asset()).expect("bundled template asset is valid")
            })
            .collect();
        Self { templates }
    }

    /// Loads `<stem>.txt` for each template kind from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut templates = Vec::new();
        for kind in TemplateKind::ALL {
            let path = dir.join(format!("{}.txt", kind.file_stem()));
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::TemplateAsset {
                name: path.display().to_string(),
                reason: e.to_string(),
            })?;
            templates.push(PromptTemplate::parse(kind, &text)?);
        }
        Ok(Self { templates })
    }

    pub fn get(&self, kind: TemplateKind) -> &PromptTemplate {
        self.templates
            .iter()
            .find(|t| t.kind == kind)
            .expect("template set holds every kind")
    }

    /// Digest over every template rendered with empty slots.
    pub fn digest(&self) -> String {
        let mut all = String::new();
        for kind in TemplateKind::ALL {
            all.push_str(kind.file_stem());
            all.push('\0');
            all.push_str(&self.get(kind).render(CLAIM_SLOT, CONTEXT_SLOT));
            all.push('\0');
        }
        crate::digest::sha256_hex(all.as_bytes())
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}
