//! Text-completion gateway over live, replay and scripted backends.

mod adapter;
mod scripted;
mod trace;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::transport::{HttpRequest, HttpTransport, TransportError};

pub use adapter::AdapterMapping;
pub use scripted::{live_query, ScriptRule, ScriptedBackend};
pub use trace::{read_trace_file, RecordMeta, Recorder, ReplayStore, TraceRecord};

pub const DEFAULT_MODEL_ID: &str = "text-davinci-003";
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const DEFAULT_RETRIES: u32 = 3;

/// Digest of the identity-bearing request fields.
///
/// The hashed bytes are the compact JSON array `[model_id, prompt, stops]`
/// as written by serde_json.
pub fn request_tag(model_id: &str, prompt: &str, stops: &[String]) -> String {
    let canonical = json!([model_id, prompt, stops]).to_string();
    crate::digest::sha256_hex(canonical.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
    pub model_id: String,
    pub request_tag: String,
}

impl CompletionRequest {
    /// Request with default decoding: temperature 0, the example separator as
    /// the only stop sequence.
    pub fn new(model_id: &str, prompt: &str) -> Self {
        let stops = vec![crate::prompt::EXAMPLE_SEPARATOR.to_string()];
        Self {
            request_tag: request_tag(model_id, prompt, &stops),
            prompt: prompt.to_string(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
            stop_sequences: stops,
            model_id: model_id.to_string(),
        }
    }

    pub fn with_stops(mut self, stops: Vec<String>) -> Self {
        self.request_tag = request_tag(&self.model_id, &self.prompt, &stops);
        self.stop_sequences = stops;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Replay,
    Scripted,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Live => "live",
            Self::Replay => "replay",
            Self::Scripted => "scripted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub backend: BackendKind,
    pub latency_ms: u64,
    #[serde(default)]
    pub token_usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempt(s): {reason}")]
    BackendUnavailable { attempts: u32, reason: String },
    #[error("replay miss: no recorded completion for tag {tag}")]
    ReplayMiss { tag: String },
    #[error("scripted backend has no answer left")]
    ScriptExhausted,
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("trace storage failure: {0}")]
    StorageFailure(String),
    #[error("gateway configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: DEFAULT_RETRIES,
            base_delay: Duration::from_millis(500),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, retry: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(retry.saturating_sub(1) as i32))
    }
}

pub struct LiveBackend {
    pub url: String,
    pub api_key: Option<String>,
    pub mapping: AdapterMapping,
    pub retry: RetryPolicy,
    transport: Arc<dyn HttpTransport>,
    attempts: AtomicUsize,
}

impl LiveBackend {
    pub fn new(url: &str, api_key: Option<String>, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            url: url.to_string(),
            api_key,
            mapping: AdapterMapping::default(),
            retry: RetryPolicy::default(),
            transport,
            attempts: AtomicUsize::new(0),
        }
    }

    pub fn with_mapping(mut self, mapping: AdapterMapping) -> Self {
        self.mapping = mapping;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// HTTP requests attempted so far, retries included.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        let mut http = HttpRequest::post(&self.url, self.mapping.request_body(request));
        if let Some(key) = &self.api_key {
            http = http.header(&self.mapping.auth_header, &self.mapping.auth_value(key));
        }
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.attempts.fetch_add(1, Ordering::SeqCst);
            let (retryable, reason) = match self.transport.send(&http) {
                Ok(resp) if resp.is_success() => {
                    let (text, token_usage) = self.mapping.parse_response(&resp.body)?;
                    return Ok(CompletionResult {
                        text,
                        backend: BackendKind::Live,
                        latency_ms: started.elapsed().as_millis() as u64,
                        token_usage,
                    });
                }
                Ok(resp) => (
                    resp.status == 429 || resp.status >= 500,
                    format!("HTTP {}", resp.status),
                ),
                Err(TransportError::Denied(url)) => (false, format!("network access denied: {url}")),
                Err(e) => (true, e.to_string()),
            };
            if !retryable || attempts > self.retry.max_retries {
                return Err(GatewayError::BackendUnavailable { attempts, reason });
            }
            std::thread::sleep(self.retry.delay_before(attempts));
        }
    }
}

pub enum Backend {
    Live(Box<LiveBackend>),
    Replay(ReplayStore),
    Scripted(ScriptedBackend),
}

impl Backend {
    pub fn kind(&self) -> BackendKind {
        match self {
            Self::Live(_) => BackendKind::Live,
            Self::Replay(_) => BackendKind::Replay,
            Self::Scripted(_) => BackendKind::Scripted,
        }
    }
}

/// Decoding settings applied to every request the pipeline builds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSettings {
    pub model_id: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            model_id: DEFAULT_MODEL_ID.to_string(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
            stop_sequences: vec![crate::prompt::EXAMPLE_SEPARATOR.to_string()],
        }
    }
}

impl GenerationSettings {
    pub fn request(&self, prompt: &str) -> CompletionRequest {
        CompletionRequest::new(&self.model_id, prompt)
            .with_stops(self.stop_sequences.clone())
            .with_max_tokens(self.max_tokens)
            .with_temperature(self.temperature)
    }
}

/// Shared entry point for completions. Safe to call from many threads.
pub struct Gateway {
    backend: Backend,
    settings: GenerationSettings,
    recorder: Mutex<Option<Recorder>>,
    calls: AtomicUsize,
}

impl Gateway {
    pub fn new(backend: Backend) -> Self {
        Self {
            backend,
            settings: GenerationSettings::default(),
            recorder: Mutex::new(None),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_settings(mut self, settings: GenerationSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn scripted(backend: ScriptedBackend) -> Self {
        Self::new(Backend::Scripted(backend))
    }

    pub fn replay(store: ReplayStore) -> Self {
        Self::new(Backend::Replay(store))
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn settings(&self) -> &GenerationSettings {
        &self.settings
    }

    pub fn request(&self, prompt: &str) -> CompletionRequest {
        self.settings.request(prompt)
    }

    /// Completion calls issued so far, failed ones included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// HTTP requests the live backend has attempted.
    pub fn live_calls(&self) -> usize {
        match &self.backend {
            Backend::Live(live) => live.attempts(),
            _ => 0,
        }
    }

    /// Digest of the replay store, when replaying.
    pub fn fixture_digest(&self) -> Option<&str> {
        match &self.backend {
            Backend::Replay(store) => Some(store.digest()),
            _ => None,
        }
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let result = match &self.backend {
            Backend::Live(live) => live.complete(request)?,
            Backend::Replay(store) => {
                let record = store.get(&request.request_tag).ok_or_else(|| GatewayError::ReplayMiss {
                    tag: request.request_tag.clone(),
                })?;
                CompletionResult {
                    text: record.completion.clone(),
                    backend: BackendKind::Replay,
                    latency_ms: 0,
                    token_usage: record.token_usage,
                }
            }
            Backend::Scripted(script) => CompletionResult {
                text: script.answer(request)?,
                backend: BackendKind::Scripted,
                latency_ms: 0,
                token_usage: None,
            },
        };
        if let Some(recorder) = self.recorder.lock().expect("recorder poisoned").as_mut() {
            recorder.append(&TraceRecord::new(request, &result))?;
        }
        Ok(result)
    }

    /// Starts appending every completed call to a fresh trace file at `path`.
    pub fn record_session(&self, path: &Path) -> Result<(), GatewayError> {
        if matches!(self.backend, Backend::Replay(_)) {
            return Err(GatewayError::Config("cannot record while replaying".into()));
        }
        let mut slot = self.recorder.lock().expect("recorder poisoned");
        if slot.is_some() {
            return Err(GatewayError::Config("a recording session is already active".into()));
        }
        *slot = Some(Recorder::create(path)?);
        Ok(())
    }

    /// Closes the active session; the returned file loads as a [`ReplayStore`].
    pub fn finalize_session(&self) -> Result<PathBuf, GatewayError> {
        let recorder = self
            .recorder
            .lock()
            .expect("recorder poisoned")
            .take()
            .ok_or_else(|| GatewayError::Config("no active recording session".into()))?;
        recorder.finish()
    }
}
