use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::label::GoldLabel;
use crate::pipeline::{Challenge, Claim, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    HoverJson,
    FeverousJson,
    SciFactJson,
    GenericJsonl,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "hover" | "hoverjson" => Ok(Self::HoverJson),
            "feverous" | "feverousjson" => Ok(Self::FeverousJson),
            "scifact" | "scifactopen" | "scifactjson" => Ok(Self::SciFactJson),
            "jsonl" | "generic" | "genericjsonl" => Ok(Self::GenericJsonl),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

impl DatasetFormat {
    pub fn dataset(self) -> Dataset {
        match self {
            Self::HoverJson => Dataset::Hover,
            Self::FeverousJson => Dataset::Feverous,
            Self::SciFactJson => Dataset::SciFactOpen,
            Self::GenericJsonl => Dataset::Custom,
        }
    }
}

/// Which source keys hold each field. Empty strings disable a field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub id: String,
    pub claim: String,
    pub label: String,
    pub hops: String,
    pub challenge: String,
    pub evidence: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        Self::for_format(DatasetFormat::GenericJsonl)
    }
}

impl FieldMapping {
    pub fn for_format(format: DatasetFormat) -> Self {
        let base = Self {
            id: "id".into(),
            claim: "claim".into(),
            label: "label".into(),
            hops: String::new(),
            challenge: "challenge".into(),
            evidence: String::new(),
        };
        match format {
            DatasetFormat::HoverJson => Self {
                id: "uid".into(),
                hops: "num_hops".into(),
                challenge: String::new(),
                ..base
            },
            DatasetFormat::FeverousJson => base,
            DatasetFormat::SciFactJson => Self {
                label: String::new(),
                challenge: String::new(),
                evidence: "evidence".into(),
                ..base
            },
            DatasetFormat::GenericJsonl => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub format: DatasetFormat,
    /// Extra source-label spellings, checked before the built-in ones.
    #[serde(default)]
    pub label_mapping: BTreeMap<String, GoldLabel>,
    #[serde(default)]
    pub fields: Option<FieldMapping>,
}

impl DatasetFile {
    pub fn new(path: impl Into<PathBuf>, format: DatasetFormat) -> Self {
        Self {
            path: path.into(),
            format,
            label_mapping: BTreeMap::new(),
            fields: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoadedDataset {
    pub claims: Vec<Claim>,
    pub diagnostics: Vec<String>,
}

fn records(path: &Path, text: &str) -> Result<Vec<(usize, Value)>, EvalError> {
    let fail = |line: usize, message: String| EvalError::FormatError {
        path: path.display().to_string(),
        line,
        message,
    };
    if text.trim_start().starts_with('[') {
        let values: Vec<Value> = serde_json::from_str(text).map_err(|e| fail(e.line(), e.to_string()))?;
        return Ok(values.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect());
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(line).map_err(|e| fail(i + 1, e.to_string()))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

fn text_field(record: &Value, key: &str) -> Option<String> {
    if key.is_empty() {
        return None;
    }
    match record.get(key)? {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Collects every `label` found in a SciFact-style evidence object
/// (`{doc_id: {label, ...}}` or `{doc_id: [{label, ...}, ...]}`).
fn evidence_labels(evidence: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let mut push = |v: &Value| {
        if let Some(l) = v.get("label").and_then(Value::as_str) {
            out.push(l.to_string());
        }
    };
    match evidence {
        Value::Object(docs) => {
            for doc in docs.values() {
                match doc {
                    Value::Array(items) => items.iter().for_each(&mut push),
                    other => push(other),
                }
            }
        }
        Value::Array(items) => items.iter().for_each(&mut push),
        _ => {}
    }
    out
}

/// Loads claims, skipping (with a diagnostic) any record whose label does not
/// map to SUPPORTED or NOT_SUPPORTED.
pub fn load_dataset(file: &DatasetFile) -> Result<LoadedDataset, EvalError> {
    let path = file.path.as_path();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let fields = file.fields.clone().unwrap_or_else(|| FieldMapping::for_format(file.format));
    let map_label = |raw: &str| -> Option<GoldLabel> {
        file.label_mapping
            .get(raw.trim())
            .copied()
            .or_else(|| GoldLabel::from_source(raw))
    };
    let mut out = LoadedDataset::default();
    let mut seen = HashSet::new();
    for (line, record) in records(path, &text)? {
        let fail = |message: String| EvalError::FormatError {
            path: path.display().to_string(),
            line,
            message,
        };
        if !record.is_object() {
            return Err(fail("record is not a JSON object".into()));
        }
        let id = text_field(&record, &fields.id).unwrap_or_else(|| format!("line-{line}"));
        let claim_text = text_field(&record, &fields.claim).ok_or_else(|| fail(format!("missing `{}`", fields.claim)))?;
        let skip = |out: &mut LoadedDataset, why: String| out.diagnostics.push(format!("line {line} ({id}): {why}"));

        let gold = if file.format == DatasetFormat::SciFactJson && !fields.evidence.is_empty() {
            let labels = record.get(&fields.evidence).map(evidence_labels).unwrap_or_default();
            let mapped: Vec<Option<GoldLabel>> = labels.iter().map(|l| map_label(l)).collect();
            match mapped.first() {
                None => {
                    skip(&mut out, "no evidence; skipped".into());
                    continue;
                }
                Some(first) if first.is_some() && mapped.iter().all(|m| m == first) => first.unwrap(),
                Some(_) => {
                    skip(&mut out, format!("incomplete or conflicting evidence labels {labels:?}; skipped"));
                    continue;
                }
            }
        } else {
            let raw = text_field(&record, &fields.label).unwrap_or_default();
            match map_label(&raw) {
                Some(g) => g,
                None => {
                    skip(&mut out, format!("label `{raw}` has no verdict mapping; skipped"));
                    continue;
                }
            }
        };

        let challenge = match file.format {
            DatasetFormat::SciFactJson => Challenge::Scientific,
            _ => {
                let from_hops = record
                    .get(&fields.hops)
                    .and_then(|v| v.as_u64().or_else(|| v.as_str().and_then(|s| s.trim().parse().ok())))
                    .and_then(Challenge::from_hops);
                let named = text_field(&record, &fields.challenge).and_then(|c| c.parse::<Challenge>().ok());
                from_hops.or(named).unwrap_or(Challenge::None)
            }
        };
        if !seen.insert(id.clone()) {
            skip(&mut out, "duplicate id; skipped".into());
            continue;
        }
        out.claims.push(Claim {
            id,
            text: claim_text,
            gold_label: gold,
            dataset: file.format.dataset(),
            challenge,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn generic_jsonl() {
        let f = write("{\"id\":\"c1\",\"claim\":\"Some claim.\",\"label\":\"SUPPORTED\"}\n\n");
        let d = load_dataset(&DatasetFile::new(f.path(), DatasetFormat::GenericJsonl)).unwrap();
        assert_eq!(d.claims.len(), 1);
        assert_eq!(d.claims[0].gold_label, GoldLabel::Supported);
        assert_eq!(d.claims[0].challenge, Challenge::None);
    }

    #[test]
    fn hover_hops() {
        let f = write(r#"[{"uid":"h1","claim":"A","label":"SUPPORTED","num_hops":4},{"uid":"h2","claim":"B","label":"NOT_SUPPORTED","num_hops":2}]"#);
        let d = load_dataset(&DatasetFile::new(f.path(), DatasetFormat::HoverJson)).unwrap();
        assert_eq!(d.claims[0].challenge, Challenge::FourHop);
        assert_eq!(d.claims[1].challenge, Challenge::TwoHop);
        assert_eq!(d.claims[0].dataset, Dataset::Hover);
    }

    #[test]
    fn feverous_labels_and_challenges() {
        let f = write(concat!(
            "{\"id\":1,\"claim\":\"A\",\"label\":\"SUPPORTS\",\"challenge\":\"Numerical Reasoning\"}\n",
            "{\"id\":2,\"claim\":\"B\",\"label\":\"REFUTES\",\"challenge\":\"Combining Tables and Text\"}\n",
            "{\"id\":3,\"claim\":\"C\",\"label\":\"NOT ENOUGH INFO\",\"challenge\":\"Multi-hop Reasoning\"}\n",
        ));
        let d = load_dataset(&DatasetFile::new(f.path(), DatasetFormat::FeverousJson)).unwrap();
        assert_eq!(d.claims.len(), 2);
        assert_eq!(d.claims[0].gold_label, GoldLabel::Supported);
        assert_eq!(d.claims[0].challenge, Challenge::Numerical);
        assert_eq!(d.claims[1].gold_label, GoldLabel::NotSupported);
        assert_eq!(d.claims[1].challenge, Challenge::TextAndTable);
        assert_eq!(d.diagnostics.len(), 1);
    }

    #[test]
    fn scifact_complete_evidence_only() {
        let f = write(concat!(
            "{\"id\":\"s1\",\"claim\":\"A\",\"evidence\":{\"10\":{\"label\":\"SUPPORT\"},\"11\":{\"label\":\"SUPPORT\"}}}\n",
            "{\"id\":\"s2\",\"claim\":\"B\",\"evidence\":{}}\n",
            "{\"id\":\"s3\",\"claim\":\"C\",\"evidence\":{\"10\":{\"label\":\"SUPPORT\"},\"12\":{\"label\":\"CONTRADICT\"}}}\n",
            "{\"id\":\"s4\",\"claim\":\"D\",\"evidence\":{\"12\":[{\"label\":\"CONTRADICT\"}]}}\n",
        ));
        let d = load_dataset(&DatasetFile::new(f.path(), DatasetFormat::SciFactJson)).unwrap();
        let ids: Vec<&str> = d.claims.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["s1", "s4"]);
        assert_eq!(d.claims[1].gold_label, GoldLabel::NotSupported);
        assert!(d.claims.iter().all(|c| c.challenge == Challenge::Scientific));
        assert_eq!(d.diagnostics.len(), 2);
    }

    #[test]
    fn format_error_reports_line() {
        let f = write("{\"id\":\"a\",\"claim\":\"x\",\"label\":\"SUPPORTED\"}\n{broken\n");
        match load_dataset(&DatasetFile::new(f.path(), DatasetFormat::GenericJsonl)) {
            Err(EvalError::FormatError { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let f = write("{\"id\":\"a\",\"label\":\"SUPPORTED\"}\n");
        assert!(matches!(
            load_dataset(&DatasetFile::new(f.path(), DatasetFormat::GenericJsonl)),
            Err(EvalError::FormatError { line: 1, .. })
        ));
    }

    #[test]
    fn custom_mapping() {
        let f = write("{\"key\":\"k\",\"text\":\"x\",\"verdict\":\"true\"}\n");
        let mut file = DatasetFile::new(f.path(), DatasetFormat::GenericJsonl);
        file.fields = Some(FieldMapping {
            id: "key".into(),
            claim: "text".into(),
            label: "verdict".into(),
            ..FieldMapping::default()
        });
        file.label_mapping.insert("true".into(), GoldLabel::Supported);
        let d = load_dataset(&file).unwrap();
        assert_eq!(d.claims[0].id, "k");
        assert_eq!(d.claims[0].gold_label, GoldLabel::Supported);
    }
}
