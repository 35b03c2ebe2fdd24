//! Run settings resolved from flags, an optional TOML file, and the
//! environment, in that order of precedence.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::Args;
use folk_core::eval::DatasetFormat;
use folk_core::gateway::{DEFAULT_MAX_TOKENS, DEFAULT_MODEL_ID, DEFAULT_RETRIES};
use folk_core::grounding::{GroundingConfig, ProviderKind, RestrictionMode};
use folk_core::Strategy;
use serde::Deserialize;

use crate::CliError;

pub const ENV_LLM_URL: &str = "LLM_API_URL";
pub const ENV_LLM_KEY: &str = "LLM_API_KEY";
pub const ENV_MODEL_ID: &str = "LLM_MODEL_ID";
pub const ENV_SEARCH_KEY: &str = "SEARCH_API_KEY";

/// Per-claim limit applied to live runs unless configured otherwise.
pub const LIVE_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Live,
    Replay(PathBuf),
    Scripted(PathBuf),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "live" {
            return Ok(Self::Live);
        }
        match s.split_once(':') {
            Some(("replay", path)) if !path.is_empty() => Ok(Self::Replay(path.into())),
            Some(("scripted", path)) if !path.is_empty() => Ok(Self::Scripted(path.into())),
            _ => Err(format!("invalid backend `{s}` (expected live, replay:PATH or scripted:PATH)")),
        }
    }
}

impl BackendSpec {
    fn rebase(self, base: &Path) -> Self {
        match self {
            Self::Replay(p) => Self::Replay(base.join(p)),
            Self::Scripted(p) => Self::Scripted(base.join(p)),
            live => live,
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// direct, cot, selfask or folk
    #[arg(long)]
    pub strategy: Option<String>,
    /// live, replay:PATH or scripted:PATH
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// hover, feverous, scifact or jsonl
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long = "sample-n")]
    pub sample_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Domain put in front of search queries; `none` disables it.
    #[arg(long = "site-restriction")]
    pub site_restriction: Option<String>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Offline corpus (NDJSON of {question, answer, url}).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Persistent answer cache.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Grounding provider order, e.g. `cache,corpus,web`.
    #[arg(long, value_delimiter = ',')]
    pub providers: Option<Vec<String>>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "llm-url")]
    pub llm_url: Option<String>,
    /// Per-claim time limit in seconds; 0 disables it.
    #[arg(long = "timeout-secs")]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub url: Option<String>,
    pub model_id: Option<String>,
    pub max_tokens: Option<u32>,
    pub temperature: Option<f64>,
    pub retries: Option<u32>,
    /// TOML file describing the request and response field mapping.
    pub adapter: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundingSection {
    pub corpus: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub providers: Option<Vec<String>>,
    pub restriction_mode: Option<RestrictionMode>,
    pub snippet_max_chars: Option<usize>,
    pub prefer_answer_box: Option<bool>,
    pub search_endpoint: Option<String>,
    pub requests_per_second: Option<f64>,
}

/// Contents of a `--config` file. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub strategy: Option<String>,
    pub backend: Option<String>,
    pub dataset: Option<PathBuf>,
    pub format: Option<String>,
    pub sample_n: Option<usize>,
    pub seed: Option<u64>,
    pub site_restriction: Option<String>,
    pub parallelism: Option<usize>,
    pub out: Option<PathBuf>,
    pub timeout_secs: Option<u64>,
    pub llm: LlmSection,
    pub grounding: GroundingSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.dataset,
            &mut cfg.out,
            &mut cfg.llm.adapter,
            &mut cfg.grounding.corpus,
            &mut cfg.grounding.cache,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        if let Some(b) = &cfg.backend {
            let spec: BackendSpec = b.parse().map_err(CliError::Config)?;
            cfg.backend = Some(match spec.rebase(base) {
                BackendSpec::Live => "live".to_string(),
                BackendSpec::Replay(p) => format!("replay:{}", p.display()),
                BackendSpec::Scripted(p) => format!("scripted:{}", p.display()),
            });
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub strategy: Option<Strategy>,
    pub backend: BackendSpec,
    pub dataset: Option<PathBuf>,
    pub format: DatasetFormat,
    pub sample_n: Option<usize>,
    pub seed: u64,
    pub parallelism: usize,
    pub out: Option<PathBuf>,
    pub llm_url: Option<String>,
    pub llm_api_key: Option<String>,
    pub model_id: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub retries: u32,
    pub adapter: Option<PathBuf>,
    pub grounding: GroundingConfig,
    pub timeout: Option<Duration>,
}

fn non_empty(env: &HashMap<String, String>, key: &str) -> Option<String> {
    env.get(key).map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

fn site(value: String) -> Option<String> {
    let v = value.trim();
    if v.is_empty() || v.eq_ignore_ascii_case("none") {
        None
    } else {
        Some(v.to_string())
    }
}

impl RunConfig {
    pub fn resolve(flags: &CommonArgs, env: &HashMap<String, String>) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::resolve_with(flags, &file, env)
    }

    pub fn resolve_with(flags: &CommonArgs, file: &FileConfig, env: &HashMap<String, String>) -> Result<Self, CliError> {
        let usage = CliError::Usage;
        let strategy = flags
            .strategy
            .clone()
            .or_else(|| file.strategy.clone())
            .map(|s| s.parse::<Strategy>().map_err(usage))
            .transpose()?;
        let backend = match flags.backend.clone().or_else(|| file.backend.clone()) {
            Some(b) => b.parse().map_err(CliError::Usage)?,
            None => BackendSpec::Live,
        };
        let dataset = flags.dataset.clone().or_else(|| file.dataset.clone());
        let format = match flags.format.clone().or_else(|| file.format.clone()) {
            Some(f) => f.parse().map_err(CliError::Usage)?,
            None => DatasetFormat::GenericJsonl,
        };
        let parallelism = flags.parallelism.or(file.parallelism).unwrap_or(1);
        if parallelism == 0 {
            return Err(CliError::Usage("--parallelism must be at least 1".into()));
        }
        let offline = backend != BackendSpec::Live;

        let mut grounding = GroundingConfig {
            site_restriction: flags.site_restriction.clone().or_else(|| file.site_restriction.clone()).and_then(site),
            corpus_path: flags.corpus.clone().or_else(|| file.grounding.corpus.clone()),
            cache_path: flags.cache.clone().or_else(|| file.grounding.cache.clone()),
            ..GroundingConfig::default()
        };
        let g = &file.grounding;
        if let Some(m) = g.restriction_mode {
            grounding.restriction_mode = m;
        }
        if let Some(n) = g.snippet_max_chars {
            grounding.snippet_max_chars = n;
        }
        if let Some(b) = g.prefer_answer_box {
            grounding.prefer_answer_box = b;
        }
        if let Some(e) = &g.search_endpoint {
            grounding.search.endpoint = e.clone();
        }
        if let Some(r) = g.requests_per_second {
            grounding.search.requests_per_second = r;
        }
        grounding.search.api_key = non_empty(env, ENV_SEARCH_KEY);
        grounding.provider_order = match flags.providers.clone().or_else(|| g.providers.clone()) {
            Some(list) => list
                .iter()
                .map(|p| p.parse::<ProviderKind>())
                .collect::<Result<_, _>>()
                .map_err(CliError::Usage)?,
            // Replayed and scripted runs stay off the network unless asked.
            None if offline => vec![ProviderKind::Cache, ProviderKind::Corpus],
            None => vec![ProviderKind::Cache, ProviderKind::Corpus, ProviderKind::Web],
        };
        grounding.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let timeout = match flags.timeout_secs.or(file.timeout_secs) {
            Some(0) => None,
            Some(s) => Some(Duration::from_secs(s)),
            None if offline => None,
            None => Some(LIVE_TIMEOUT),
        };

        Ok(Self {
            strategy,
            backend,
            dataset,
            format,
            sample_n: flags.sample_n.or(file.sample_n),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            parallelism,
            out: flags.out.clone().or_else(|| file.out.clone()),
            llm_url: flags
                .llm_url
                .clone()
                .or_else(|| file.llm.url.clone())
                .or_else(|| non_empty(env, ENV_LLM_URL)),
            llm_api_key: non_empty(env, ENV_LLM_KEY),
            model_id: flags
                .model
                .clone()
                .or_else(|| file.llm.model_id.clone())
                .or_else(|| non_empty(env, ENV_MODEL_ID))
                .unwrap_or_else(|| DEFAULT_MODEL_ID.to_string()),
            max_tokens: file.llm.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
            temperature: file.llm.temperature.unwrap_or(0.0),
            retries: file.llm.retries.unwrap_or(DEFAULT_RETRIES),
            adapter: file.llm.adapter.clone(),
            grounding,
            timeout,
        })
    }

    pub fn require_strategy(&self) -> Result<Strategy, CliError> {
        self.strategy
            .ok_or_else(|| CliError::Usage("--strategy is required (direct, cot, selfask or folk)".into()))
    }

    /// Checks that the chosen backend can run at all.
    pub fn check_backend(&self) -> Result<(), CliError> {
        match &self.backend {
            BackendSpec::Live => {
                if self.llm_url.is_none() {
                    return Err(CliError::Config(format!("live backend needs {ENV_LLM_URL} (or --llm-url)")));
                }
                if self.llm_api_key.is_none() {
                    return Err(CliError::Config(format!("live backend needs {ENV_LLM_KEY}")));
                }
            }
            BackendSpec::Replay(p) | BackendSpec::Scripted(p) => {
                if !p.is_file() {
                    return Err(CliError::Config(format!("fixture file {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}
