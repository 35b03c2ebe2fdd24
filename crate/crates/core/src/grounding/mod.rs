//! Knowledge grounding: answer follow-up questions from outside the model.
//!
//! Providers are consulted in configured order and the first one with an
//! answer wins. Live web-search answers are the top-ranked result's snippet
//! and are written to the answer cache.

mod search;
mod store;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transport::{HttpRequest, HttpTransport};

pub use search::{build_query, top_hit, truncate_at_word, RateLimiter, RestrictionMode, SearchHit};
pub use store::{normalize_question, warm_cache, AnswerCache, CacheRecord, CorpusRecord, OfflineCorpus};

pub const DEFAULT_SEARCH_ENDPOINT: &str = "https://serpapi.com/search.json";
pub const WIKIPEDIA: &str = "en.wikipedia.org";
pub const MIN_SNIPPET_CHARS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    WebSearch,
    OfflineCorpus,
    Cache,
    /// The model's own answer, used only by the grounding ablation.
    SelfGenerated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedQA {
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub source_url: String,
    pub provider: Provider,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundingError {
    #[error("empty question")]
    EmptyQuestion,
    #[error("no provider produced an answer for `{0}`")]
    GroundingMiss(String),
    #[error("search provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("invalid grounding config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Cache,
    Corpus,
    Web,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cache" => Ok(Self::Cache),
            "corpus" | "offline" => Ok(Self::Corpus),
            "web" | "websearch" | "search" => Ok(Self::Web),
            other => Err(format!("unknown grounding provider `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub endpoint: String,
    pub engine: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub requests_per_second: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_SEARCH_ENDPOINT.to_string(),
            engine: "google".to_string(),
            api_key: None,
            requests_per_second: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingConfig {
    pub site_restriction: Option<String>,
    pub restriction_mode: RestrictionMode,
    pub snippet_max_chars: usize,
    pub cache_path: Option<PathBuf>,
    pub corpus_path: Option<PathBuf>,
    pub provider_order: Vec<ProviderKind>,
    pub prefer_answer_box: bool,
    pub search: SearchSettings,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        Self {
            site_restriction: None,
            restriction_mode: RestrictionMode::Prefix,
            snippet_max_chars: 600,
            cache_path: None,
            corpus_path: None,
            provider_order: vec![ProviderKind::Cache, ProviderKind::Corpus, ProviderKind::Web],
            prefer_answer_box: true,
            search: SearchSettings::default(),
        }
    }
}

impl GroundingConfig {
    pub fn validate(&self) -> Result<(), GroundingError> {
        if self.snippet_max_chars < MIN_SNIPPET_CHARS {
            return Err(GroundingError::Config(format!(
                "snippet_max_chars must be at least {MIN_SNIPPET_CHARS}"
            )));
        }
        if self.provider_order.is_empty() {
            return Err(GroundingError::Config("provider order is empty".into()));
        }
        Ok(())
    }
}

/// Answers follow-up questions through the configured providers.
pub struct Grounder {
    config: GroundingConfig,
    transport: Arc<dyn HttpTransport>,
    corpus: Option<OfflineCorpus>,
    corpus_digest: Option<String>,
    cache: AnswerCache,
    limiter: RateLimiter,
    calls: AtomicUsize,
    web_requests: AtomicUsize,
}

impl Grounder {
    /// Builds a grounder, loading the corpus and cache files named in `config`.
    pub fn new(config: GroundingConfig, transport: Arc<dyn HttpTransport>) -> Result<Self, GroundingError> {
        config.validate()?;
        let (corpus, corpus_digest) = match &config.corpus_path {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| GroundingError::Storage(format!("{}: {e}", path.display())))?;
                (Some(OfflineCorpus::load(path)?), Some(crate::digest::sha256_hex(&bytes)))
            }
            None => (None, None),
        };
        let cache = match &config.cache_path {
            Some(path) => AnswerCache::open(path)?,
            None => AnswerCache::in_memory(),
        };
        Ok(Self {
            limiter: RateLimiter::new(config.search.requests_per_second),
            config,
            transport,
            corpus,
            corpus_digest,
            cache,
            calls: AtomicUsize::new(0),
            web_requests: AtomicUsize::new(0),
        })
    }

    /// Replaces the corpus with an in-memory one.
    pub fn with_corpus(mut self, corpus: OfflineCorpus) -> Self {
        self.corpus = Some(corpus);
        self
    }

    pub fn config(&self) -> &GroundingConfig {
        &self.config
    }

    /// Number of `ground_question` calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Number of live search requests attempted so far.
    pub fn web_requests(&self) -> usize {
        self.web_requests.load(Ordering::SeqCst)
    }

    pub fn corpus_digest(&self) -> Option<&str> {
        self.corpus_digest.as_deref()
    }

    pub fn cache(&self) -> &AnswerCache {
        &self.cache
    }

    fn site(&self) -> Option<&str> {
        self.config.site_restriction.as_deref().filter(|s| !s.trim().is_empty())
    }

    pub fn ground_question(&self, question: &str) -> Result<GroundedQA, GroundingError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let question = question.trim();
        if question.is_empty() {
            return Err(GroundingError::EmptyQuestion);
        }
        let mut unavailable = None;
        for provider in &self.config.provider_order {
            match provider {
                ProviderKind::Cache => {
                    if let Some(hit) = self.cache.get(question, self.site()) {
                        return Ok(GroundedQA {
                            question: question.to_string(),
                            answer: hit.answer,
                            source_url: hit.url,
                            provider: Provider::Cache,
                        });
                    }
                }
                ProviderKind::Corpus => {
                    if let Some(hit) = self.corpus.as_ref().and_then(|c| c.lookup(question)) {
                        if !hit.answer.trim().is_empty() {
                            return Ok(GroundedQA {
                                question: question.to_string(),
                                answer: hit.answer.clone(),
                                source_url: hit.url.clone(),
                                provider: Provider::OfflineCorpus,
                            });
                        }
                    }
                }
                ProviderKind::Web => match self.search(question) {
                    Ok(Some(qa)) => {
                        self.cache.upsert(&qa, self.site())?;
                        return Ok(qa);
                    }
                    Ok(None) => {}
                    Err(reason) => unavailable = Some(reason),
                },
            }
        }
        Err(match unavailable {
            Some(reason) => GroundingError::ProviderUnavailable(reason),
            None => GroundingError::GroundingMiss(question.to_string()),
        })
    }

    /// One live search; `Ok(None)` when the response holds no usable result.
    fn search(&self, question: &str) -> Result<Option<GroundedQA>, String> {
        let Some(key) = self.config.search.api_key.as_deref() else {
            return Err("SEARCH_API_KEY is not set".to_string());
        };
        let query = build_query(question, self.site(), self.config.restriction_mode);
        let request = HttpRequest::get(&self.config.search.endpoint)
            .query("engine", &self.config.search.engine)
            .query("q", &query)
            .query("api_key", key);
        self.limiter.acquire();
        self.web_requests.fetch_add(1, Ordering::SeqCst);
        let response = self.transport.send(&request).map_err(|e| e.to_string())?;
        if !response.is_success() {
            return Err(format!("search endpoint returned HTTP {}", response.status));
        }
        Ok(top_hit(&response.body, self.config.prefer_answer_box).and_then(|hit| {
            let answer = truncate_at_word(&hit.snippet, self.config.snippet_max_chars);
            (!answer.is_empty()).then(|| GroundedQA {
                question: question.to_string(),
                answer,
                source_url: hit.url,
                provider: Provider::WebSearch,
            })
        }))
    }

    /// Upserts pairs into this grounder's cache; returns the number of new keys.
    pub fn warm_cache(&self, qa_list: &[GroundedQA]) -> Result<usize, GroundingError> {
        let mut written = 0;
        for qa in qa_list {
            if self.cache.upsert(qa, self.site())? {
                written += 1;
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{DenyAllTransport, HttpResponse, StubTransport, TransportError};
    use serde_json::json;

    fn corpus_with(pairs: &[(&str, &str, &str)]) -> OfflineCorpus {
        OfflineCorpus::new(pairs.iter().map(|(q, a, u)| CorpusRecord {
            question: q.to_string(),
            answer: a.to_string(),
            url: u.to_string(),
        }))
    }

    fn search_stub() -> Arc<StubTransport> {
        Arc::new(StubTransport::new(|req| {
            let q = req.query_value("q").unwrap_or_default().to_string();
            Ok(HttpResponse::ok(json!({
                "organic_results": [{"snippet": format!("snippet for {q}"), "link": "https://example.org/top"}]
            })))
        }))
    }

    fn web_config() -> GroundingConfig {
        let mut config = GroundingConfig::default();
        config.search.api_key = Some("test-key".into());
        config.search.requests_per_second = 1000.0;
        config
    }

    #[test]
    fn offline_corpus_answer() {
        let config = GroundingConfig {
            provider_order: vec![ProviderKind::Corpus],
            ..GroundingConfig::default()
        };
        let grounder = Grounder::new(config, Arc::new(DenyAllTransport::new()))
            .unwrap()
            .with_corpus(corpus_with(&[(
                "When and where was the 2012 SportAccord World Mind Games inaugurated?",
                "The International Mind Sports Association (IMSA) inaugurated the SportAccord World Mind Games December 2011 in Beijing ...",
                "",
            )]));
        let qa = grounder
            .ground_question("When and where was the 2012 SportAccord World Mind Games inaugurated?")
            .unwrap();
        assert!(qa.answer.contains("inaugurated the SportAccord World Mind Games December 2011 in Beijing"));
        assert_eq!(qa.provider, Provider::OfflineCorpus);
        assert_eq!(
            grounder.ground_question("  WHEN and where was the 2012 SportAccord World Mind Games   inaugurated? ").unwrap().answer,
            qa.answer
        );
        assert!(matches!(grounder.ground_question("unknown?"), Err(GroundingError::GroundingMiss(_))));
        assert_eq!(grounder.ground_question("  "), Err(GroundingError::EmptyQuestion));
    }

    #[test]
    fn site_restriction_prefixes_query() {
        let transport = search_stub();
        let config = GroundingConfig {
            site_restriction: Some(WIKIPEDIA.into()),
            provider_order: vec![ProviderKind::Web],
            ..web_config()
        };
        let grounder = Grounder::new(config, transport.clone()).unwrap();
        let question = "Where is Howard Hospital located?";
        let qa = grounder.ground_question(question).unwrap();
        let sent = transport.requests();
        assert_eq!(sent.len(), 1);
        assert_eq!(sent[0].query_value("q"), Some(format!("en.wikipedia.org {question}").as_str()));
        assert_eq!(sent[0].query_value("api_key"), Some("test-key"));
        assert_eq!(qa.provider, Provider::WebSearch);
        assert_eq!(qa.source_url, "https://example.org/top");
    }

    #[test]
    fn cache_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let transport = search_stub();
        let config = GroundingConfig {
            cache_path: Some(dir.path().join("cache.ndjson")),
            provider_order: vec![ProviderKind::Cache, ProviderKind::Web],
            ..web_config()
        };
        let grounder = Grounder::new(config.clone(), transport.clone()).unwrap();
        let live = grounder.ground_question("Who wrote Girl Talk?").unwrap();
        let cached = grounder.ground_question("who wrote girl talk?").unwrap();
        assert_eq!(transport.request_count(), 1);
        assert_eq!(cached.provider, Provider::Cache);
        assert_eq!((live.answer.as_str(), live.source_url.as_str()), (cached.answer.as_str(), cached.source_url.as_str()));

        // a fresh grounder over the same file answers without the network
        let deny = Arc::new(DenyAllTransport::new());
        let reopened = Grounder::new(config, deny.clone()).unwrap();
        assert_eq!(reopened.ground_question("Who wrote Girl Talk?").unwrap().answer, live.answer);
        assert_eq!(deny.attempts(), 0);
    }

    #[test]
    fn cache_keys_include_site_restriction() {
        let transport = search_stub();
        let mut config = GroundingConfig {
            provider_order: vec![ProviderKind::Cache, ProviderKind::Web],
            ..web_config()
        };
        let open = Grounder::new(config.clone(), transport.clone()).unwrap();
        open.ground_question("Q?").unwrap();
        config.site_restriction = Some(WIKIPEDIA.into());
        let wiki = Grounder::new(config, transport.clone()).unwrap();
        wiki.warm_cache(&[]).unwrap();
        wiki.ground_question("Q?").unwrap();
        assert_eq!(transport.request_count(), 2);
    }

    #[test]
    fn network_failure_without_fallback() {
        let transport = Arc::new(StubTransport::new(|_| Err(TransportError::Network("down".into()))));
        let config = GroundingConfig {
            provider_order: vec![ProviderKind::Web],
            ..web_config()
        };
        let grounder = Grounder::new(config.clone(), transport.clone()).unwrap();
        assert!(matches!(grounder.ground_question("Q?"), Err(GroundingError::ProviderUnavailable(_))));

        let with_fallback = Grounder::new(
            GroundingConfig {
                provider_order: vec![ProviderKind::Web, ProviderKind::Corpus],
                ..config
            },
            transport,
        )
        .unwrap()
        .with_corpus(corpus_with(&[("Q?", "A.", "")]));
        assert_eq!(with_fallback.ground_question("Q?").unwrap().provider, Provider::OfflineCorpus);
    }

    #[test]
    fn missing_api_key_is_unavailable() {
        let config = GroundingConfig {
            provider_order: vec![ProviderKind::Web],
            ..GroundingConfig::default()
        };
        let deny = Arc::new(DenyAllTransport::new());
        let grounder = Grounder::new(config, deny.clone()).unwrap();
        assert!(matches!(grounder.ground_question("Q?"), Err(GroundingError::ProviderUnavailable(_))));
        assert_eq!(deny.attempts(), 0);
    }

    #[test]
    fn snippets_are_truncated() {
        let long = "word ".repeat(200);
        let transport = Arc::new(StubTransport::new(move |_| {
            Ok(HttpResponse::ok(json!({"organic_results": [{"snippet": long, "link": "u"}]})))
        }));
        let config = GroundingConfig {
            provider_order: vec![ProviderKind::Web],
            snippet_max_chars: 64,
            ..web_config()
        };
        let qa = Grounder::new(config, transport).unwrap().ground_question("Q?").unwrap();
        assert!(qa.answer.chars().count() <= 64);
        assert!(qa.answer.ends_with("word"));
    }

    #[test]
    fn config_validation() {
        let config = GroundingConfig {
            snippet_max_chars: 10,
            ..GroundingConfig::default()
        };
        assert!(matches!(
            Grounder::new(config, Arc::new(DenyAllTransport::new())),
            Err(GroundingError::Config(_))
        ));
    }

    #[test]
    fn warm_cache_counts_new_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.ndjson");
        let pair = GroundedQA {
            question: "Q?".into(),
            answer: "A.".into(),
            source_url: "https://a".into(),
            provider: Provider::WebSearch,
        };
        assert_eq!(warm_cache(&[], &path, None).unwrap(), 0);
        assert_eq!(warm_cache(std::slice::from_ref(&pair), &path, None).unwrap(), 1);
        assert_eq!(warm_cache(std::slice::from_ref(&pair), &path, None).unwrap(), 0);

        let five: Vec<GroundedQA> = (0..5)
            .map(|i| GroundedQA {
                question: format!("question {i}?"),
                answer: format!("answer {i}."),
                source_url: format!("https://s/{i}"),
                provider: Provider::WebSearch,
            })
            .collect();
        assert_eq!(warm_cache(&five, &path, None).unwrap(), 5);
        let transport = search_stub();
        let grounder = Grounder::new(
            GroundingConfig {
                cache_path: Some(path),
                ..web_config()
            },
            transport.clone(),
        )
        .unwrap();
        for qa in &five {
            let got = grounder.ground_question(&qa.question).unwrap();
            assert_eq!(got.provider, Provider::Cache);
            assert_eq!(got.answer, qa.answer);
        }
        assert_eq!(transport.request_count(), 0);
    }
}
