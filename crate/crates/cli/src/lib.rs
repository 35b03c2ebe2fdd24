//! The `folk` command line: verify a claim, run and score batches, run
//! ablations, and record replay fixtures.

pub mod config;
mod render;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use folk_core::eval::{
    load_dataset, read_predictions, stratified_sample_per_challenge, AlphaMetric, DatasetFile, EvalReport, RankingSheet,
    SystemScores,
};
use folk_core::gateway::{
    AdapterMapping, Backend, Gateway, GenerationSettings, LiveBackend, ReplayStore, RetryPolicy, ScriptedBackend,
};
use folk_core::grounding::Grounder;
use folk_core::pipeline::{AnswerSource, BatchOutput, Claim, CrossFormat, PipelineOptions, Verifier};
use folk_core::transport::HttpTransport;
use folk_core::{GoldLabel, Label, Strategy};
use thiserror::Error;

pub use config::{BackendSpec, CommonArgs, FileConfig, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "folk", version, about = "Claim verification with predicate decomposition and grounded answers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationVariant {
    /// CoT reasoning prompt over FOLK's questions and answers.
    CotWithFolkQuestions,
    /// Self-Ask reasoning prompt over FOLK's questions and answers.
    SelfaskWithFolkQuestions,
    /// Grounded answers against the model's own answers.
    SelfAnswers,
    /// Site-restricted search against unrestricted search.
    SiteRestriction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlphaArg {
    Ordinal,
    Interval,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify one claim and print the verdict.
    Verify {
        /// Claim text.
        #[arg(required = true)]
        claim: Vec<String>,
        #[arg(long, default_value = "claim")]
        id: String,
        /// Print the full trace as JSON.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Verify a dataset and write a run file.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score run files (and external predictions) into a report.
    Score {
        /// Run files written by `run` or `ablate`.
        runs: Vec<PathBuf>,
        /// External predictions as NAME=PATH (JSONL of {id, label}); needs --dataset.
        #[arg(long = "predictions")]
        predictions: Vec<String>,
        /// Explanation rankings (CSV: annotator,item,criterion,system,rank).
        #[arg(long)]
        rankings: Option<PathBuf>,
        #[arg(long = "alpha-metric", value_enum, default_value = "ordinal")]
        alpha_metric: AlphaArg,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one of the ablation studies.
    Ablate {
        #[arg(long, value_enum)]
        variant: AblationVariant,
        /// FOLK run file whose questions and answers are reused.
        #[arg(long = "folk-run")]
        folk_run: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run claims against a live or scripted model and record every completion
    /// into a replay store.
    RecordFixtures {
        /// Replay store to write.
        #[arg(long)]
        fixtures: PathBuf,
        /// A single claim instead of --dataset.
        #[arg(long)]
        claim: Option<String>,
        #[arg(long, default_value = "claim")]
        id: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Runs the CLI against injected process state and returns the exit code.
pub fn execute(
    args: &[String],
    env: &HashMap<String, String>,
    transport: Arc<dyn HttpTransport>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            } else {
                let _ = write!(stderr, "{text}");
                EXIT_ERROR
            };
        }
    };
    let mut io = Io { stdout, stderr };
    let result = match cli.command {
        Command::Verify { claim, id, json, common } => cmd_verify(&claim.join(" "), &id, json, &common, env, transport, &mut io),
        Command::Run { common } => cmd_run(&common, env, transport, &mut io),
        Command::Score {
            runs,
            predictions,
            rankings,
            alpha_metric,
            common,
        } => cmd_score(&runs, &predictions, rankings.as_deref(), alpha_metric, &common, env, &mut io),
        Command::Ablate {
            variant,
            folk_run,
            common,
        } => cmd_ablate(variant, folk_run.as_deref(), &common, env, transport, &mut io),
        Command::RecordFixtures {
            fixtures,
            claim,
            id,
            common,
        } => cmd_record(&fixtures, claim.as_deref(), &id, &common, env, transport, &mut io),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

struct Io<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn out(&mut self, text: &str) -> Result<(), CliError> {
        self.stdout.write_all(text.as_bytes()).map_err(runtime)
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(self.stderr, "{text}");
    }
}

pub fn build_gateway(cfg: &RunConfig, transport: Arc<dyn HttpTransport>) -> Result<Gateway, CliError> {
    cfg.check_backend()?;
    let backend = match &cfg.backend {
        BackendSpec::Live => {
            let url = cfg.llm_url.clone().expect("checked above");
            let mut live = LiveBackend::new(&url, cfg.llm_api_key.clone(), transport).with_retry(RetryPolicy {
                max_retries: cfg.retries,
                ..RetryPolicy::default()
            });
            if let Some(path) = &cfg.adapter {
                live = live.with_mapping(AdapterMapping::load(path).map_err(|e| CliError::Config(e.to_string()))?);
            }
            Backend::Live(Box::new(live))
        }
        BackendSpec::Replay(path) => Backend::Replay(ReplayStore::load(path).map_err(runtime)?),
        BackendSpec::Scripted(path) => Backend::Scripted(ScriptedBackend::load(path).map_err(runtime)?),
    };
    Ok(Gateway::new(backend).with_settings(GenerationSettings {
        model_id: cfg.model_id.clone(),
        max_tokens: cfg.max_tokens,
        temperature: cfg.temperature,
        ..GenerationSettings::default()
    }))
}

pub fn build_verifier(
    cfg: &RunConfig,
    transport: Arc<dyn HttpTransport>,
    answer_source: AnswerSource,
) -> Result<Verifier, CliError> {
    let gateway = build_gateway(cfg, transport.clone())?;
    let grounder = Grounder::new(cfg.grounding.clone(), transport).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Verifier::new(Arc::new(gateway), Arc::new(grounder)).with_options(PipelineOptions {
        timeout: cfg.timeout,
        answer_source,
    }))
}

fn load_claims(cfg: &RunConfig) -> Result<Vec<Claim>, CliError> {
    let path = cfg
        .dataset
        .clone()
        .ok_or_else(|| CliError::Usage("--dataset is required".into()))?;
    let loaded = load_dataset(&DatasetFile::new(path, cfg.format)).map_err(runtime)?;
    let claims = match cfg.sample_n {
        Some(n) => stratified_sample_per_challenge(&loaded.claims, n, cfg.seed).map_err(runtime)?,
        None => loaded.claims,
    };
    Ok(claims)
}

/// Records the sampling choice; `n` applies to each challenge separately.
fn note_sampling(cfg: &RunConfig, batch: &mut BatchOutput) {
    if let Some(n) = cfg.sample_n {
        let notes = &mut batch.manifest.notes;
        notes.insert("sample_n".into(), n.to_string());
        notes.insert("sample_scope".into(), "per-challenge".into());
        notes.insert("sample_seed".into(), cfg.seed.to_string());
    }
}

fn report_batch(io: &mut Io, batch: &BatchOutput, dest: &str) {
    let unknown = batch.traces.iter().filter(|t| t.final_label == Label::Unknown).count();
    let errors: usize = batch.traces.iter().map(|t| t.errors.len()).sum();
    io.note(&format!("{} traces -> {dest} ({unknown} unknown, {errors} errors)", batch.traces.len()));
    for t in &batch.traces {
        let _ = write!(io.stderr, "{}", render::errors(t));
    }
}

fn emit(io: &mut Io, batch: &BatchOutput, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => batch.write(path).map_err(runtime)?,
        None => io.out(&batch.to_ndjson())?,
    }
    let dest = out.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into());
    report_batch(io, batch, &dest);
    Ok(())
}

fn cmd_verify(
    text: &str,
    id: &str,
    json: bool,
    common: &CommonArgs,
    env: &HashMap<String, String>,
    transport: Arc<dyn HttpTransport>,
    io: &mut Io,
) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(common, env)?;
    let strategy = cfg.require_strategy()?;
    if text.trim().is_empty() {
        return Err(CliError::Usage("claim text is empty".into()));
    }
    let verifier = build_verifier(&cfg, transport, AnswerSource::Grounded)?;
    let claim = Claim::new(id, text.trim());
    let batch = verifier.run_batch(std::slice::from_ref(&claim), strategy, 1);
    let trace = &batch.traces[0];
    if json {
        io.out(&format!("{}\n", trace.to_json_line()))?;
    } else {
        io.out(&render::verdict(trace))?;
    }
    let _ = write!(io.stderr, "{}", render::errors(trace));
    if let Some(path) = &cfg.out {
        batch.write(path).map_err(runtime)?;
    }
    Ok(if trace.final_label.is_determinate() { EXIT_OK } else { EXIT_UNKNOWN })
}

fn cmd_run(
    common: &CommonArgs,
    env: &HashMap<String, String>,
    transport: Arc<dyn HttpTransport>,
    io: &mut Io,
) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(common, env)?;
    let strategy = cfg.require_strategy()?;
    let claims = load_claims(&cfg)?;
    let verifier = build_verifier(&cfg, transport, AnswerSource::Grounded)?;
    let mut batch = verifier.run_batch(&claims, strategy, cfg.parallelism);
    note_sampling(&cfg, &mut batch);
    emit(io, &batch, cfg.out.as_deref())?;
    Ok(EXIT_OK)
}

fn system_name(batch: &BatchOutput) -> String {
    if let Some(name) = batch.manifest.notes.get("system") {
        return name.clone();
    }
    let base = batch.manifest.strategy.display_name();
    match &batch.manifest.variant {
        Some(v) => format!("{base} [{v}]"),
        None => base.to_string(),
    }
}

fn cmd_score(
    runs: &[PathBuf],
    predictions: &[String],
    rankings: Option<&Path>,
    alpha: AlphaArg,
    common: &CommonArgs,
    env: &HashMap<String, String>,
    io: &mut Io,
) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(common, env)?;
    if runs.is_empty() && predictions.is_empty() && rankings.is_none() {
        return Err(CliError::Usage("nothing to score: give run files, --predictions or --rankings".into()));
    }
    let gold_claims = match &cfg.dataset {
        Some(path) => Some(load_dataset(&DatasetFile::new(path, cfg.format)).map_err(runtime)?.claims),
        None => None,
    };
    let gold: Option<HashMap<String, GoldLabel>> = gold_claims
        .as_ref()
        .map(|cs| cs.iter().map(|c| (c.id.clone(), c.gold_label)).collect());
    let mut report = EvalReport::default();
    for path in runs {
        let batch = BatchOutput::read(path).map_err(runtime)?;
        report.systems.push(SystemScores::from_run(&system_name(&batch), &batch, gold.as_ref()));
    }
    for spec in predictions {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--predictions expects NAME=PATH, got `{spec}`")))?;
        let claims = gold_claims
            .as_ref()
            .ok_or_else(|| CliError::Usage("--predictions needs --dataset for gold labels".into()))?;
        let preds = read_predictions(Path::new(path)).map_err(runtime)?;
        report.systems.push(SystemScores::from_predictions(name, &preds, claims));
    }
    if let Some(path) = rankings {
        let sheet = RankingSheet::load(path).map_err(runtime)?;
        let metric = match alpha {
            AlphaArg::Ordinal => AlphaMetric::Ordinal,
            AlphaArg::Interval => AlphaMetric::Interval,
        };
        report.add_rankings(&sheet, metric).map_err(runtime)?;
    }
    io.out(&report.render_table())?;
    if let Some(path) = &cfg.out {
        std::fs::write(path, report.to_json()).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(EXIT_OK)
}

fn cmd_ablate(
    variant: AblationVariant,
    folk_run: Option<&Path>,
    common: &CommonArgs,
    env: &HashMap<String, String>,
    transport: Arc<dyn HttpTransport>,
    io: &mut Io,
) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(common, env)?;
    let cross = match variant {
        AblationVariant::CotWithFolkQuestions => Some(CrossFormat::CotWithFolkQuestions),
        AblationVariant::SelfaskWithFolkQuestions => Some(CrossFormat::SelfaskWithFolkQuestions),
        _ => None,
    };
    if let Some(cross) = cross {
        let path = folk_run.ok_or_else(|| CliError::Usage("this variant needs --folk-run".into()))?;
        let folk = BatchOutput::read(path).map_err(runtime)?;
        let claims = match cfg.dataset {
            Some(_) => load_claims(&cfg)?,
            None => folk.traces.iter().map(|t| t.claim.clone()).collect(),
        };
        let verifier = build_verifier(&cfg, transport, AnswerSource::Grounded)?;
        let mut batch = verifier
            .cross_format_run(&claims, &folk.traces, cross, cfg.parallelism)
            .map_err(runtime)?;
        if cfg.dataset.is_some() {
            note_sampling(&cfg, &mut batch);
        }
        emit(io, &batch, cfg.out.as_deref())?;
        return Ok(EXIT_OK);
    }

    let dir = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("this variant needs --out DIR".into()))?;
    let strategy = cfg.strategy.unwrap_or(Strategy::Folk);
    let claims = load_claims(&cfg)?;
    let mut arms: Vec<(String, String, RunConfig, AnswerSource)> = Vec::new();
    match variant {
        AblationVariant::SelfAnswers => {
            arms.push(("grounded".into(), "grounded answers".into(), cfg.clone(), AnswerSource::Grounded));
            arms.push(("self-answers".into(), "self answers".into(), cfg.clone(), AnswerSource::SelfGenerated));
        }
        _ => {
            let site = cfg
                .grounding
                .site_restriction
                .clone()
                .unwrap_or_else(|| folk_core::grounding::WIKIPEDIA.to_string());
            let mut restricted = cfg.clone();
            restricted.grounding.site_restriction = Some(site.clone());
            let mut open = cfg.clone();
            open.grounding.site_restriction = None;
            arms.push(("restricted".into(), site, restricted, AnswerSource::Grounded));
            arms.push(("unrestricted".into(), "unrestricted".into(), open, AnswerSource::Grounded));
        }
    }
    let mut report = EvalReport::default();
    for (file, system, arm_cfg, source) in arms {
        let verifier = build_verifier(&arm_cfg, transport.clone(), source)?;
        let mut batch = verifier.run_batch(&claims, strategy, arm_cfg.parallelism);
        batch.manifest.notes.insert("system".into(), system.clone());
        note_sampling(&arm_cfg, &mut batch);
        let path = dir.join(format!("{file}.ndjson"));
        batch.write(&path).map_err(runtime)?;
        report_batch(io, &batch, &path.display().to_string());
        report.systems.push(SystemScores::from_run(&system, &batch, None));
    }
    io.out(&report.render_table())?;
    Ok(EXIT_OK)
}

fn cmd_record(
    fixtures: &Path,
    claim: Option<&str>,
    id: &str,
    common: &CommonArgs,
    env: &HashMap<String, String>,
    transport: Arc<dyn HttpTransport>,
    io: &mut Io,
) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(common, env)?;
    let strategy = cfg.require_strategy()?;
    if matches!(cfg.backend, BackendSpec::Replay(_)) {
        return Err(CliError::Usage("record-fixtures needs a live or scripted backend".into()));
    }
    let claims = match claim {
        Some(text) => vec![Claim::new(id, text.trim())],
        None => load_claims(&cfg)?,
    };
    let verifier = build_verifier(&cfg, transport, AnswerSource::Grounded)?;
    verifier.gateway().record_session(fixtures).map_err(runtime)?;
    let mut batch = verifier.run_batch(&claims, strategy, cfg.parallelism);
    if claim.is_none() {
        note_sampling(&cfg, &mut batch);
    }
    let recorded = verifier.gateway().finalize_session().map_err(runtime)?;
    let entries = ReplayStore::load(&recorded).map_err(runtime)?.len();
    io.note(&format!("recorded {entries} completions -> {}", recorded.display()));
    if let Some(path) = &cfg.out {
        batch.write(path).map_err(runtime)?;
    }
    let dest = cfg.out.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "not written".into());
    report_batch(io, &batch, &dest);
    Ok(EXIT_OK)
}
