//! Runs one strategy over claims and records everything it did.

mod claim;
mod trace;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::fol::{evaluate_clause, Judgment, Predicate, PredicateClause, TruthAssignment, TruthValue};
use crate::gateway::{Gateway, GatewayError};
use crate::grounding::{GroundedQA, Grounder, GroundingError, Provider};
use crate::label::{Label, Strategy};
use crate::prompt::{
    build_decompose_prompt, build_reasoning_prompt, build_self_answer_prompt, parse_decomposition,
    parse_verdict, Decomposition, ParsedVerdict, Phase, PromptError, TemplateSet,
};

pub use claim::{Challenge, Claim, Dataset};
pub use trace::{
    citations_of, BatchOutput, ConsistencyFlag, PromptRecord, RunManifest, Stage, StageTimings, TraceError,
    VerdictTrace, TRACE_SCHEMA,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("run file: {0}")]
    Storage(String),
    #[error("no FOLK decompositions available: {0}")]
    MissingFolkArtifacts(String),
}

/// Where follow-up answers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    /// Knowledge grounding through the [`Grounder`].
    #[default]
    Grounded,
    /// The model answers its own questions (grounding ablation).
    SelfGenerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PipelineOptions {
    /// Per-claim wall-clock limit; `None` waits indefinitely.
    pub timeout: Option<Duration>,
    pub answer_source: AnswerSource,
}

/// The ablation that reuses FOLK's questions and answers under another
/// strategy's reasoning prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossFormat {
    CotWithFolkQuestions,
    SelfaskWithFolkQuestions,
}

impl CrossFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CotWithFolkQuestions => "cot-with-folk-questions",
            Self::SelfaskWithFolkQuestions => "selfask-with-folk-questions",
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Self::CotWithFolkQuestions => Strategy::Cot,
            Self::SelfaskWithFolkQuestions => Strategy::SelfAsk,
        }
    }
}

impl std::str::FromStr for CrossFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "cot-with-folk-questions" => Ok(Self::CotWithFolkQuestions),
            "selfask-with-folk-questions" | "self-ask-with-folk-questions" => Ok(Self::SelfaskWithFolkQuestions),
            other => Err(format!("unknown cross-format variant `{other}`")),
        }
    }
}

pub fn gateway_error_kind(e: &GatewayError) -> &'static str {
    match e {
        GatewayError::BackendUnavailable { .. } => "BackendUnavailable",
        GatewayError::ReplayMiss { .. } => "ReplayMiss",
        GatewayError::ScriptExhausted => "ScriptExhausted",
        GatewayError::MalformedResponse(_) => "MalformedResponse",
        GatewayError::StorageFailure(_) => "StorageFailure",
        GatewayError::Config(_) => "Config",
    }
}

pub fn grounding_error_kind(e: &GroundingError) -> &'static str {
    match e {
        GroundingError::EmptyQuestion => "EmptyQuestion",
        GroundingError::GroundingMiss(_) => "GroundingMiss",
        GroundingError::ProviderUnavailable(_) => "ProviderUnavailable",
        GroundingError::Storage(_) => "StorageFailure",
        GroundingError::Config(_) => "Config",
    }
}

pub fn prompt_error_kind(e: &PromptError) -> &'static str {
    match e {
        PromptError::UnsupportedPhase { .. } => "UnsupportedPhase",
        PromptError::MissingContext => "MissingContext",
        PromptError::NoQuestions => "NoQuestions",
        PromptError::UnexpectedContext => "UnexpectedContext",
        PromptError::TemplateAsset { .. } => "TemplateAsset",
    }
}

fn err(stage: Stage, kind: &str, message: impl ToString) -> TraceError {
    TraceError {
        stage,
        kind: kind.to_string(),
        message: message.to_string(),
    }
}

fn empty_verdict() -> ParsedVerdict {
    ParsedVerdict {
        label: Label::Unknown,
        predicate_judgments: TruthAssignment::new(),
        explanation: String::new(),
        diagnostics: Vec::new(),
    }
}

fn empty_trace(claim: &Claim, strategy: Strategy) -> VerdictTrace {
    VerdictTrace {
        claim: claim.clone(),
        strategy,
        variant: None,
        decomposition: Decomposition::default(),
        grounded: Vec::new(),
        prompts: Vec::new(),
        completions: Vec::new(),
        parsed: empty_verdict(),
        clause_value: None,
        final_label: Label::Unknown,
        consistency_flag: ConsistencyFlag::NotApplicable,
        citations: Vec::new(),
        timings: StageTimings::default(),
        errors: Vec::new(),
    }
}

fn millis(d: Duration) -> u64 {
    d.as_millis() as u64
}

/// Evaluates the decomposition's clause against the model's judgments.
///
/// Judgments are matched to predicates by identity. When the model restated
/// the heads differently but gave exactly one judgment per predicate, they are
/// matched by position instead. Anything left over is `Unknown`.
pub fn clause_value(decomposition: &Decomposition, verdict: &ParsedVerdict) -> (TruthValue, Vec<String>) {
    let mut diagnostics = Vec::new();
    let clause = match decomposition.predicates.clone().filter(|c| !c.is_empty()) {
        Some(c) => c,
        None => {
            let judged: Vec<Predicate> = verdict
                .predicate_judgments
                .iter()
                .filter_map(|(id, _)| Predicate::new(&id.name, &id.args, "").ok())
                .collect();
            match PredicateClause::new(judged) {
                Ok((c, _)) => {
                    diagnostics.push("no decomposition clause; evaluated the judged predicates".into());
                    c
                }
                Err(_) => {
                    diagnostics.push("no predicates to evaluate".into());
                    return (TruthValue::Unknown, diagnostics);
                }
            }
        }
    };
    let judgments: Vec<&Judgment> = verdict.predicate_judgments.iter().map(|(_, j)| j).collect();
    let positional = judgments.len() == clause.len();
    let mut assignment = TruthAssignment::new();
    for (i, p) in clause.predicates().iter().enumerate() {
        let judgment = match verdict.predicate_judgments.get(&p.id()) {
            Some(j) => j.clone(),
            None if positional => {
                diagnostics.push(format!("judgment for `{}` matched by position", p.head()));
                judgments[i].clone()
            }
            None => {
                diagnostics.push(format!("no judgment for `{}`; treated as Unknown", p.head()));
                Judgment::new(TruthValue::Unknown, None)
            }
        };
        assignment.set(p.id(), judgment);
    }
    let value = evaluate_clause(&clause, &assignment).expect("assignment covers the clause");
    (value, diagnostics)
}

pub fn consistency(value: TruthValue, label: Label) -> ConsistencyFlag {
    match (value, label) {
        (TruthValue::True, Label::Supported) | (TruthValue::False, Label::NotSupported) => ConsistencyFlag::Consistent,
        _ => ConsistencyFlag::LabelClauseMismatch,
    }
}

/// Runs claims through the shared gateway and grounder. Cheap to clone.
#[derive(Clone)]
pub struct Verifier {
    gateway: Arc<Gateway>,
    grounder: Arc<Grounder>,
    templates: Arc<TemplateSet>,
    options: PipelineOptions,
}

impl Verifier {
    pub fn new(gateway: Arc<Gateway>, grounder: Arc<Grounder>) -> Self {
        Self {
            gateway,
            grounder,
            templates: Arc::new(TemplateSet::builtin()),
            options: PipelineOptions::default(),
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = Arc::new(templates);
        self
    }

    pub fn with_options(mut self, options: PipelineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn grounder(&self) -> &Grounder {
        &self.grounder
    }

    pub fn options(&self) -> PipelineOptions {
        self.options
    }

    /// Verifies one claim. Failures end up inside the trace, never as an `Err`.
    pub fn verify_claim(&self, claim: &Claim, strategy: Strategy) -> VerdictTrace {
        self.bounded(claim, strategy, None, {
            let claim = claim.clone();
            move |v: &Verifier| v.run(&claim, strategy)
        })
    }

    fn bounded(
        &self,
        claim: &Claim,
        strategy: Strategy,
        variant: Option<CrossFormat>,
        job: impl FnOnce(&Verifier) -> VerdictTrace + Send + 'static,
    ) -> VerdictTrace {
        let Some(limit) = self.options.timeout else {
            return job(self);
        };
        let (tx, rx) = mpsc::channel();
        let worker = self.clone();
        std::thread::spawn(move || {
            let _ = tx.send(job(&worker));
        });
        rx.recv_timeout(limit).unwrap_or_else(|_| {
            let mut t = empty_trace(claim, strategy);
            t.variant = variant.map(|v| v.as_str().to_string());
            t.errors.push(err(Stage::Timeout, "Timeout", format!("no verdict within {} ms", limit.as_millis())));
            t.timings.total_ms = millis(limit);
            t
        })
    }

    fn complete(&self, t: &mut VerdictTrace, stage: Stage, phase: Phase, prompt: String) -> Option<String> {
        let request = self.gateway.request(&prompt);
        t.prompts.push(PromptRecord { phase, text: prompt });
        match self.gateway.complete(&request) {
            Ok(result) => {
                let text = result.text.clone();
                t.completions.push(result);
                Some(text)
            }
            Err(e) => {
                t.errors.push(err(stage, gateway_error_kind(&e), e));
                None
            }
        }
    }

    fn answer(&self, question: &str) -> Result<GroundedQA, TraceError> {
        match self.options.answer_source {
            AnswerSource::Grounded => self
                .grounder
                .ground_question(question)
                .map_err(|e| err(Stage::Grounding, grounding_error_kind(&e), e)),
            AnswerSource::SelfGenerated => {
                let request = self.gateway.request(&build_self_answer_prompt(question));
                let result = self
                    .gateway
                    .complete(&request)
                    .map_err(|e| err(Stage::Grounding, gateway_error_kind(&e), e))?;
                let answer = crate::fol::squash_whitespace(&result.text);
                if answer.is_empty() {
                    return Err(err(Stage::Grounding, "GroundingMiss", format!("empty self-answer for `{question}`")));
                }
                Ok(GroundedQA {
                    question: question.to_string(),
                    answer,
                    source_url: String::new(),
                    provider: Provider::SelfGenerated,
                })
            }
        }
    }

    fn run(&self, claim: &Claim, strategy: Strategy) -> VerdictTrace {
        let started = Instant::now();
        let mut t = empty_trace(claim, strategy);
        if claim.text.trim().is_empty() {
            t.errors.push(err(Stage::Setup, "EmptyClaim", "claim text is empty"));
            return finish(t, started);
        }
        if strategy != Strategy::Direct {
            let stage_start = Instant::now();
            let prompt = match build_decompose_prompt(&self.templates, strategy, &claim.text) {
                Ok(p) => p,
                Err(e) => {
                    t.errors.push(err(Stage::Decompose, prompt_error_kind(&e), e));
                    return finish(t, started);
                }
            };
            let Some(completion) = self.complete(&mut t, Stage::Decompose, Phase::Decompose, prompt) else {
                return finish(t, started);
            };
            t.timings.decompose_ms = millis(stage_start.elapsed());
            match parse_decomposition(strategy, &completion) {
                Ok(d) => t.decomposition = d,
                Err(e) => {
                    t.errors.push(err(Stage::Decompose, prompt_error_kind(&e), e));
                    return finish(t, started);
                }
            }

            let stage_start = Instant::now();
            for question in t.decomposition.questions.clone() {
                match self.answer(&question) {
                    Ok(qa) => t.grounded.push(qa),
                    Err(e) => t.errors.push(e),
                }
            }
            t.timings.grounding_ms = millis(stage_start.elapsed());
            if !t.errors.is_empty() {
                return finish(t, started);
            }
        }
        self.reason(&mut t, strategy);
        finish(t, started)
    }

    fn reason(&self, t: &mut VerdictTrace, strategy: Strategy) {
        let stage_start = Instant::now();
        let prompt = match build_reasoning_prompt(&self.templates, strategy, &t.claim.text, &t.decomposition, &t.grounded) {
            Ok(p) => p,
            Err(e) => {
                t.errors.push(err(Stage::Reason, prompt_error_kind(&e), e));
                return;
            }
        };
        let Some(completion) = self.complete(t, Stage::Reason, Phase::Reason, prompt) else {
            return;
        };
        t.timings.reason_ms = millis(stage_start.elapsed());
        t.parsed = parse_verdict(strategy, &completion);
    }

    /// Verifies every claim on `parallelism` workers; output order follows input order.
    pub fn run_batch(&self, claims: &[Claim], strategy: Strategy, parallelism: usize) -> BatchOutput {
        let traces = parallel_map(claims, parallelism, |c| self.verify_claim(c, strategy));
        BatchOutput {
            manifest: self.manifest(strategy, None, claims.len()),
            traces,
        }
    }

    /// Reasoning-only runs that reuse a prior FOLK run's questions and answers.
    pub fn cross_format_run(
        &self,
        claims: &[Claim],
        folk: &[VerdictTrace],
        variant: CrossFormat,
        parallelism: usize,
    ) -> Result<BatchOutput, PipelineError> {
        let by_id: HashMap<&str, &VerdictTrace> = folk
            .iter()
            .filter(|t| t.strategy == Strategy::Folk && t.variant.is_none())
            .map(|t| (t.claim.id.as_str(), t))
            .collect();
        if by_id.is_empty() && !claims.is_empty() {
            return Err(PipelineError::MissingFolkArtifacts("no FOLK traces supplied".into()));
        }
        let strategy = variant.strategy();
        let traces = parallel_map(claims, parallelism, |claim| {
            let source = by_id.get(claim.id.as_str()).map(|t| (*t).clone());
            self.bounded(claim, strategy, Some(variant), {
                let claim = claim.clone();
                move |v: &Verifier| v.run_cross_format(&claim, source.as_ref(), variant)
            })
        });
        Ok(BatchOutput {
            manifest: self.manifest(strategy, Some(variant), claims.len()),
            traces,
        })
    }

    fn run_cross_format(&self, claim: &Claim, folk: Option<&VerdictTrace>, variant: CrossFormat) -> VerdictTrace {
        let started = Instant::now();
        let strategy = variant.strategy();
        let mut t = empty_trace(claim, strategy);
        t.variant = Some(variant.as_str().to_string());
        let usable = folk.filter(|f| f.errors.is_empty() && !f.grounded.is_empty());
        let Some(source) = usable else {
            let why = match folk {
                None => "no FOLK trace for this claim",
                Some(_) => "the FOLK trace has no grounded answers",
            };
            t.errors.push(err(Stage::Setup, "MissingFolkArtifacts", why));
            return finish(t, started);
        };
        t.decomposition = Decomposition {
            predicates: None,
            questions: source.decomposition.questions.clone(),
            diagnostics: Vec::new(),
        };
        t.grounded = source.grounded.clone();
        self.reason(&mut t, strategy);
        finish(t, started)
    }

    /// Settings that determine trace content; file paths are left out so the
    /// digest is stable across checkouts.
    pub fn config_value(&self, strategy: Strategy, variant: Option<CrossFormat>) -> serde_json::Value {
        let g = self.grounder.config();
        json!({
            "strategy": strategy,
            "variant": variant,
            "generation": self.gateway.settings(),
            "backend": self.gateway.backend().kind(),
            "answer_source": self.options.answer_source,
            "timeout_ms": self.options.timeout.map(|d| d.as_millis() as u64),
            "grounding": {
                "site_restriction": g.site_restriction,
                "restriction_mode": g.restriction_mode,
                "snippet_max_chars": g.snippet_max_chars,
                "provider_order": g.provider_order,
                "prefer_answer_box": g.prefer_answer_box,
                "search_endpoint": g.search.endpoint,
            },
            "templates": self.templates.digest(),
        })
    }

    pub fn manifest(&self, strategy: Strategy, variant: Option<CrossFormat>, claim_count: usize) -> RunManifest {
        let config = self.config_value(strategy, variant).to_string();
        let mut fixture_digests = BTreeMap::new();
        if let Some(d) = self.gateway.fixture_digest() {
            fixture_digests.insert("replay".to_string(), d.to_string());
        }
        if let Some(d) = self.grounder.corpus_digest() {
            fixture_digests.insert("corpus".to_string(), d.to_string());
        }
        RunManifest {
            schema: TRACE_SCHEMA.to_string(),
            strategy,
            variant: variant.map(|v| v.as_str().to_string()),
            claim_count,
            config_digest: crate::digest::sha256_hex(config.as_bytes()),
            fixture_digests,
            notes: BTreeMap::new(),
        }
    }
}

fn finish(mut t: VerdictTrace, started: Instant) -> VerdictTrace {
    t.citations = citations_of(&t.grounded);
    let failed = !t.errors.is_empty();
    if t.strategy == Strategy::Folk && !failed {
        let (value, diagnostics) = clause_value(&t.decomposition, &t.parsed);
        t.parsed.diagnostics.extend(diagnostics);
        t.clause_value = Some(value);
        t.consistency_flag = consistency(value, t.parsed.label);
    } else {
        t.consistency_flag = ConsistencyFlag::NotApplicable;
    }
    t.final_label = if failed { Label::Unknown } else { t.parsed.label };
    t.timings.total_ms = millis(started.elapsed());
    t
}

/// Maps `f` over `items` on up to `parallelism` scoped threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], parallelism: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = parallelism.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let out = f(item);
                slots.lock().expect("result slots poisoned")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every index was processed"))
        .collect()
}
