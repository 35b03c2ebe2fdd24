use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{GroundedQA, GroundingError};
use crate::fol::squash_whitespace;

/// Lookup key for a question: trimmed, lowercased, inner whitespace collapsed.
pub fn normalize_question(question: &str) -> String {
    squash_whitespace(question).to_lowercase()
}

/// One line of an offline corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub url: String,
}

/// One line of a cache file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub site_restriction: Option<String>,
    pub cached_at: String,
}

fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, GroundingError> {
    let file = File::open(path).map_err(|e| GroundingError::Storage(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GroundingError::Storage(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            GroundingError::Storage(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Exact-match question/answer corpus used for offline runs and tests.
#[derive(Debug, Clone, Default)]
pub struct OfflineCorpus {
    entries: HashMap<String, CorpusRecord>,
}

impl OfflineCorpus {
    pub fn new(records: impl IntoIterator<Item = CorpusRecord>) -> Self {
        let mut entries = HashMap::new();
        for r in records {
            entries.entry(normalize_question(&r.question)).or_insert(r);
        }
        Self { entries }
    }

    pub fn load(path: &Path) -> Result<Self, GroundingError> {
        Ok(Self::new(read_ndjson::<CorpusRecord>(path)?))
    }

    pub fn lookup(&self, question: &str) -> Option<&CorpusRecord> {
        self.entries.get(&normalize_question(question))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

type CacheKey = (String, String);

fn cache_key(question: &str, site_restriction: Option<&str>) -> CacheKey {
    (
        normalize_question(question),
        site_restriction.unwrap_or_default().to_string(),
    )
}

struct CacheState {
    entries: HashMap<CacheKey, CacheRecord>,
    path: Option<PathBuf>,
}

/// Persistent answer cache keyed by (normalized question, site restriction).
///
/// The backing file is append-only newline-delimited JSON; when a key
/// appears more than once the last record wins on load. All writes go
/// through one lock.
pub struct AnswerCache {
    state: Mutex<CacheState>,
}

impl AnswerCache {
    pub fn in_memory() -> Self {
        Self {
            state: Mutex::new(CacheState {
                entries: HashMap::new(),
                path: None,
            }),
        }
    }

    /// Opens the cache at `path`, loading existing records if the file exists.
    pub fn open(path: &Path) -> Result<Self, GroundingError> {
        let mut entries = HashMap::new();
        if path.exists() {
            for r in read_ndjson::<CacheRecord>(path)? {
                entries.insert(cache_key(&r.question, r.site_restriction.as_deref()), r);
            }
        }
        Ok(Self {
            state: Mutex::new(CacheState {
                entries,
                path: Some(path.to_path_buf()),
            }),
        })
    }

    pub fn get(&self, question: &str, site_restriction: Option<&str>) -> Option<CacheRecord> {
        let state = self.state.lock().expect("cache lock poisoned");
        state.entries.get(&cache_key(question, site_restriction)).cloned()
    }

    /// Inserts or replaces the entry. Returns true when the key was new.
    pub fn upsert(&self, qa: &GroundedQA, site_restriction: Option<&str>) -> Result<bool, GroundingError> {
        let mut state = self.state.lock().expect("cache lock poisoned");
        let key = cache_key(&qa.question, site_restriction);
        if let Some(existing) = state.entries.get(&key) {
            if existing.answer == qa.answer && existing.url == qa.source_url {
                return Ok(false);
            }
        }
        let record = CacheRecord {
            question: qa.question.clone(),
            answer: qa.answer.clone(),
            url: qa.source_url.clone(),
            site_restriction: site_restriction.map(str::to_string),
            cached_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        };
        if let Some(path) = &state.path {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| GroundingError::Storage(format!("{}: {e}", path.display())))?;
            let line = serde_json::to_string(&record).expect("cache record serializes");
            writeln!(file, "{line}")
                .map_err(|e| GroundingError::Storage(format!("{}: {e}", path.display())))?;
        }
        Ok(state.entries.insert(key, record).is_none())
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cache lock poisoned").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Upserts every pair into the cache file at `cache_path`; returns the number
/// of keys that were not present before.
pub fn warm_cache(
    qa_list: &[GroundedQA],
    cache_path: &Path,
    site_restriction: Option<&str>,
) -> Result<usize, GroundingError> {
    let cache = AnswerCache::open(cache_path)?;
    let mut written = 0;
    for qa in qa_list {
        if cache.upsert(qa, site_restriction)? {
            written += 1;
        }
    }
    Ok(written)
}
