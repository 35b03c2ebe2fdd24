#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use folk_core::transport::{DenyAllTransport, HttpTransport};
use serde_json::json;

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn folk_with(args: &[&str], env: &HashMap<String, String>, transport: Arc<dyn HttpTransport>) -> Output {
    let mut argv = vec!["folk".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = folk_cli::execute(&argv, env, transport, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

/// Runs the CLI with an empty environment and a transport that refuses
/// everything; returns the output and the number of refused requests.
pub fn folk_offline(args: &[&str]) -> (Output, usize) {
    let deny = Arc::new(DenyAllTransport::new());
    let out = folk_with(args, &HashMap::new(), deny.clone());
    (out, deny.attempts())
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/worked_example")
}

pub fn worked_example_claim() -> String {
    std::fs::read_to_string(fixture_dir().join("claim.txt")).unwrap().trim().to_string()
}

pub fn s(p: &Path) -> String {
    p.display().to_string()
}

/// Synthetic claim world: claim `i` has `i % 3 + 1` predicates, each with one
/// follow-up question answered by the corpus. Even claims are supported; odd
/// ones have their last predicate judged False.
pub struct World {
    pub dir: tempfile::TempDir,
    pub n: usize,
}

pub fn claim_text(i: usize) -> String {
    format!("Synthetic claim {i}.")
}

fn facts(i: usize) -> usize {
    i % 3 + 1
}

fn predicate(i: usize, k: usize) -> String {
    format!("Fact{k}(Entity {i}, value {k})")
}

fn question(i: usize, k: usize) -> String {
    format!("What is fact {k} of entity {i}?")
}

pub fn decomposition(i: usize) -> String {
    let mut out = String::from("Predicates:\n");
    for k in 1..=facts(i) {
        out.push_str(&format!("{} ::: Verify fact {k} of entity {i}\n", predicate(i, k)));
    }
    out.push('\n');
    for k in 1..=facts(i) {
        out.push_str(&format!("Followup Question: {}\n", question(i, k)));
    }
    out
}

pub fn prediction(i: usize) -> String {
    let supported = i.is_multiple_of(2);
    let mut out = String::from("Prediction:\n");
    for k in 1..=facts(i) {
        let value = if !supported && k == facts(i) { "False" } else { "True" };
        out.push_str(&format!("{} is {value} because fact {k} of entity {i} is value {k}.\n", predicate(i, k)));
    }
    let label = if supported { "SUPPORTED" } else { "NOT_SUPPORTED" };
    out.push_str(&format!("The claim is [{label}].\n\nExplanation:\nEntity {i} checks out on {} facts.\n", facts(i)));
    out
}

impl World {
    pub fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut dataset = String::new();
        let mut script = String::new();
        let mut corpus = String::new();
        for i in 0..n {
            let label = if i % 2 == 0 { "SUPPORTED" } else { "NOT_SUPPORTED" };
            dataset.push_str(&format!("{}\n", json!({"id": format!("syn-{i:02}"), "claim": claim_text(i), "label": label})));
            script.push_str(&format!("{}\n", json!({"contains": format!("Claim: {}", claim_text(i)), "completion": decomposition(i)})));
            script.push_str(&format!(
                "{}\n",
                json!({"contains": format!("Is it true that {}", claim_text(i)), "completion": prediction(i)})
            ));
            for k in 1..=facts(i) {
                corpus.push_str(&format!(
                    "{}\n",
                    json!({"question": question(i, k), "answer": format!("Fact {k} of entity {i} is value {k}."), "url": format!("https://example.org/entity-{i}#{k}")})
                ));
            }
        }
        std::fs::write(dir.path().join("claims.jsonl"), dataset).unwrap();
        std::fs::write(dir.path().join("script.ndjson"), script).unwrap();
        std::fs::write(dir.path().join("corpus.ndjson"), corpus).unwrap();
        Self { dir, n }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn p(&self, name: &str) -> String {
        s(&self.path(name))
    }

    /// Records a FOLK replay store from the scripted model.
    pub fn record(&self) -> PathBuf {
        let store = self.path("replay.ndjson");
        let (out, denied) = folk_offline(&[
            "record-fixtures",
            "--strategy",
            "folk",
            "--backend",
            &format!("scripted:{}", self.p("script.ndjson")),
            "--dataset",
            &self.p("claims.jsonl"),
            "--corpus",
            &self.p("corpus.ndjson"),
            "--fixtures",
            &s(&store),
        ]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        assert_eq!(denied, 0);
        store
    }

    /// Runs FOLK over the dataset under replay; returns the exit code, the
    /// number of refused network requests and the run file path.
    pub fn replay_run(&self, store: &Path, parallelism: usize, out_name: &str) -> (Output, usize, PathBuf) {
        let out_path = self.path(out_name);
        let (out, denied) = folk_offline(&[
            "run",
            "--strategy",
            "folk",
            "--backend",
            &format!("replay:{}", s(store)),
            "--dataset",
            &self.p("claims.jsonl"),
            "--corpus",
            &self.p("corpus.ndjson"),
            "--parallelism",
            &parallelism.to_string(),
            "--out",
            &s(&out_path),
        ]);
        (out, denied, out_path)
    }
}

/// Run file re-serialized with wall-clock fields zeroed.
pub fn normalized(path: &Path) -> String {
    let mut batch = folk_core::pipeline::BatchOutput::read(path).unwrap();
    batch.normalize_timings();
    batch.to_ndjson()
}
