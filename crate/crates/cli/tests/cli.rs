mod support;

use std::collections::HashMap;
use std::sync::Arc;

use folk_core::gateway::{live_query, ReplayStore};
use folk_core::pipeline::BatchOutput;
use folk_core::transport::{HttpResponse, StubTransport};
use folk_core::Label;
use serde_json::{json, Value};
use support::*;

fn worked_example_args<'a>(extra: &[&'a str], store: &'a str, corpus: &'a str) -> Vec<&'a str> {
    let mut args = vec!["--backend", store, "--corpus", corpus];
    args.extend_from_slice(extra);
    args
}

#[test]
fn verify_worked_example_from_fixtures() {
    let store = format!("replay:{}", s(&fixture_dir().join("replay.ndjson")));
    let corpus = s(&fixture_dir().join("corpus.ndjson"));
    let claim = worked_example_claim();
    let mut args = vec!["verify", "--strategy", "folk"];
    args.extend(worked_example_args(&[&claim], &store, &corpus));
    let (out, denied) = folk_offline(&args);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(denied, 0);
    assert!(out.stdout.contains("label: NOT_SUPPORTED"));
    assert!(out.stdout.contains("https://en.wikipedia.org/wiki/Lubabalo_Kondlo"));
    assert!(out.stdout.contains("https://en.wikipedia.org/wiki/World_Mind_Sports_Games"));
    let order = ["Predicates:", "Question Answering:", "Prediction:", "Explanation:", "Sources:"];
    let positions: Vec<usize> = order.iter().map(|h| out.stdout.find(h).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn verify_usage_errors_exit_one() {
    let store = format!("replay:{}", s(&fixture_dir().join("replay.ndjson")));
    let (out, _) = folk_offline(&["verify", "--backend", &store, "some claim"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("--strategy"));
    let (out, _) = folk_offline(&["verify", "--strategy", "folk", "--bogus", "x"]);
    assert_eq!(out.code, 1);
    let (out, _) = folk_offline(&["verify", "--strategy", "folk", "--backend", "replay:/no/such/file.ndjson", "c"]);
    assert_eq!(out.code, 1);
    let (out, _) = folk_offline(&["--help"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("record-fixtures"));
}

#[test]
fn verify_replay_miss_exits_two() {
    let store = format!("replay:{}", s(&fixture_dir().join("replay.ndjson")));
    let corpus = s(&fixture_dir().join("corpus.ndjson"));
    let (out, denied) = folk_offline(&["verify", "--strategy", "folk", "--backend", &store, "--corpus", &corpus, "A claim nobody recorded."]);
    assert_eq!(out.code, 2);
    assert_eq!(denied, 0);
    assert!(out.stderr.contains("ReplayMiss"), "{}", out.stderr);
    assert!(out.stdout.contains("label: UNKNOWN"));
}

#[test]
fn live_backend_needs_credentials() {
    let (out, denied) = folk_offline(&["verify", "--strategy", "direct", "a claim"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("LLM_API_URL"));
    assert_eq!(denied, 0);
}

#[test]
fn fixture_store_is_fresh() {
    let dir = tempfile::tempdir().unwrap();
    let fresh = dir.path().join("replay.ndjson");
    let (out, _) = folk_offline(&[
        "record-fixtures",
        "--strategy",
        "folk",
        "--backend",
        &format!("scripted:{}", s(&fixture_dir().join("script.ndjson"))),
        "--corpus",
        &s(&fixture_dir().join("corpus.ndjson")),
        "--id",
        "worked-example",
        "--claim",
        &worked_example_claim(),
        "--fixtures",
        &s(&fresh),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let bundled = ReplayStore::load(&fixture_dir().join("replay.ndjson")).unwrap();
    let regenerated = ReplayStore::load(&fresh).unwrap();
    assert_eq!(bundled.len(), 2);
    assert_eq!(bundled.digest(), regenerated.digest(), "fixtures/worked_example/replay.ndjson is stale; re-record it");
}

#[test]
fn record_under_replay_is_refused() {
    let store = format!("replay:{}", s(&fixture_dir().join("replay.ndjson")));
    let (out, _) = folk_offline(&["record-fixtures", "--strategy", "folk", "--backend", &store, "--claim", "x", "--fixtures", "/tmp/never.ndjson"]);
    assert_eq!(out.code, 1);
}

#[test]
fn run_writes_manifest_and_one_trace_per_claim() {
    let world = World::new(4);
    let store = world.record();
    let (out, denied, path) = world.replay_run(&store, 2, "run.ndjson");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(denied, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
    let batch = BatchOutput::read(&path).unwrap();
    assert_eq!(batch.manifest.claim_count, 4);
    assert!(batch.manifest.fixture_digests.contains_key("replay"));
    assert!(batch.manifest.fixture_digests.contains_key("corpus"));
    assert!(batch.traces.iter().all(|t| t.final_label.is_determinate()));
}

#[test]
fn run_with_sampling() {
    let world = World::new(12);
    let store = world.record();
    let out_path = world.p("sampled.ndjson");
    let (out, _) = folk_offline(&[
        "run", "--strategy", "folk", "--backend", &format!("replay:{}", s(&store)), "--dataset", &world.p("claims.jsonl"),
        "--corpus", &world.p("corpus.ndjson"), "--sample-n", "6", "--seed", "3", "--out", &out_path,
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let batch = BatchOutput::read(std::path::Path::new(&out_path)).unwrap();
    let supported = batch.traces.iter().filter(|t| t.final_label == Label::Supported).count();
    assert_eq!((batch.traces.len(), supported), (6, 3));
    assert_eq!(batch.manifest.notes.get("sample_n").map(String::as_str), Some("6"));
    assert_eq!(batch.manifest.notes.get("sample_scope").map(String::as_str), Some("per-challenge"));
    assert_eq!(batch.manifest.notes.get("sample_seed").map(String::as_str), Some("3"));
}

#[test]
fn score_perfect_run() {
    let world = World::new(6);
    let store = world.record();
    let (_, _, run) = world.replay_run(&store, 1, "run.ndjson");
    let report = world.path("report.json");
    let (out, _) = folk_offline(&["score", &s(&run), "--out", &s(&report)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("FOLK"));
    assert!(out.stdout.contains("100.00"), "{}", out.stdout);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["systems"][0]["overall"]["macro_f1"], json!(1.0));
}

#[test]
fn score_external_predictions_and_rankings() {
    let world = World::new(4);
    let preds = world.path("preds.jsonl");
    std::fs::write(&preds, "{\"id\":\"syn-00\",\"label\":\"SUPPORTED\"}\n{\"id\":\"syn-01\",\"label\":\"SUPPORTED\"}\n").unwrap();
    let sheet = world.path("ranks.csv");
    std::fs::write(
        &sheet,
        "annotator,item,criterion,system,rank\nA,1,coverage,CoT,2\nA,1,coverage,FOLK,1\nB,1,coverage,CoT,2\nB,1,coverage,FOLK,1\nA,2,coverage,CoT,1\nA,2,coverage,FOLK,2\nB,2,coverage,CoT,1\nB,2,coverage,FOLK,2\n",
    )
    .unwrap();
    let (out, _) = folk_offline(&[
        "score", "--predictions", &format!("ProgramFC={}", s(&preds)), "--dataset", &world.p("claims.jsonl"),
        "--rankings", &s(&sheet),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("ProgramFC"));
    assert!(out.stdout.contains("Mean Average Rank (coverage)"), "{}", out.stdout);
    assert!(out.stdout.contains("Krippendorff's alpha (ordinal): 1.000"), "{}", out.stdout);
    let (out, _) = folk_offline(&["score", "--predictions", &format!("X={}", s(&preds))]);
    assert_eq!(out.code, 1);
}

#[test]
fn ablate_cross_format_makes_one_call_per_claim() {
    let world = World::new(6);
    let store = world.record();
    let (_, _, folk_run) = world.replay_run(&store, 1, "folk.ndjson");
    // The CoT reasoning prompts are new, so they come from the scripted model.
    let script = world.path("cot.ndjson");
    std::fs::write(&script, "{\"completion\":\"Therefore, the answer is: [SUPPORTED]\\nHere are the reasons: scripted.\"}\n".repeat(6)).unwrap();
    let out_path = world.path("cot.run.ndjson");
    let (out, denied) = folk_offline(&[
        "ablate", "--variant", "cot-with-folk-questions", "--folk-run", &s(&folk_run), "--backend",
        &format!("scripted:{}", s(&script)), "--out", &s(&out_path),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(denied, 0);
    let batch = BatchOutput::read(&out_path).unwrap();
    assert_eq!(batch.manifest.variant.as_deref(), Some("cot-with-folk-questions"));
    let calls: usize = batch.traces.iter().map(|t| t.completions.len()).sum();
    assert_eq!(calls, 6);
    assert!(batch.traces.iter().all(|t| t.final_label == Label::Supported));
    let (out, _) = folk_offline(&["ablate", "--variant", "selfask-with-folk-questions", "--backend", &format!("scripted:{}", s(&script))]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("--folk-run"));
}

#[test]
fn ablate_site_restriction_runs_both_arms() {
    let world = World::new(4);
    let store = world.record();
    let out_dir = world.path("site");
    let (out, denied) = folk_offline(&[
        "ablate", "--variant", "site-restriction", "--backend", &format!("replay:{}", s(&store)), "--dataset",
        &world.p("claims.jsonl"), "--corpus", &world.p("corpus.ndjson"), "--out", &s(&out_dir),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(denied, 0);
    let restricted = BatchOutput::read(&out_dir.join("restricted.ndjson")).unwrap();
    let open = BatchOutput::read(&out_dir.join("unrestricted.ndjson")).unwrap();
    assert_eq!(restricted.manifest.notes["system"], "en.wikipedia.org");
    assert_ne!(restricted.manifest.config_digest, open.manifest.config_digest);
    assert!(out.stdout.contains("en.wikipedia.org") && out.stdout.contains("unrestricted"));
}

#[test]
fn ablate_self_answers_uses_the_model_for_answers() {
    let world = World::new(2);
    let script = world.path("self.ndjson");
    let mut rules = std::fs::read_to_string(world.path("script.ndjson")).unwrap();
    rules.push_str(&format!("{}\n", json!({"contains": "Question: What is fact", "completion": "It is a value."})));
    std::fs::write(&script, rules).unwrap();
    let out_dir = world.path("self");
    let (out, _) = folk_offline(&[
        "ablate", "--variant", "self-answers", "--backend", &format!("scripted:{}", s(&script)), "--dataset",
        &world.p("claims.jsonl"), "--corpus", &world.p("corpus.ndjson"), "--out", &s(&out_dir),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let grounded = BatchOutput::read(&out_dir.join("grounded.ndjson")).unwrap();
    let internal = BatchOutput::read(&out_dir.join("self-answers.ndjson")).unwrap();
    assert!(grounded.traces.iter().all(|t| !t.citations.is_empty()));
    assert!(internal.traces.iter().all(|t| t.citations.is_empty() && t.errors.is_empty()));
    assert!(internal.traces[0].grounded.iter().all(|qa| qa.answer == "It is a value."));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("folk.toml");
    std::fs::write(
        &cfg,
        format!(
            "strategy = \"direct\"\nbackend = \"replay:{}\"\n[grounding]\ncorpus = \"{}\"\n",
            s(&fixture_dir().join("replay.ndjson")),
            s(&fixture_dir().join("corpus.ndjson"))
        ),
    )
    .unwrap();
    // direct from the file misses the store; folk from the flag hits it
    let (out, _) = folk_offline(&["verify", "--config", &s(&cfg), "--json", &worked_example_claim()]);
    assert_eq!(out.code, 2);
    let (out, _) = folk_offline(&["verify", "--config", &s(&cfg), "--strategy", "folk", "--json", &worked_example_claim()]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let trace: Value = serde_json::from_str(out.stdout.trim()).unwrap();
    assert_eq!(trace["final_label"], "NOT_SUPPORTED");
}

#[test]
fn live_backend_and_web_grounding_through_stub_transport() {
    let transport = Arc::new(StubTransport::new(|req| {
        if let Some(q) = req.query_value("q") {
            return Ok(HttpResponse::ok(json!({
                "organic_results": [{"snippet": format!("Snippet for {q}"), "link": "https://en.wikipedia.org/wiki/Stub"}]
            })));
        }
        let body = req.body.clone().unwrap_or_default();
        let prompt = body["prompt"].as_str().unwrap_or_default();
        let text = if live_query(prompt).starts_with("Claim:") {
            "Predicates:\nKnown(Stub, thing) ::: Verify stub\n\nFollowup Question: What is Stub?\n"
        } else {
            "Prediction:\nKnown(Stub, thing) is True because it is.\nThe claim is [SUPPORTED].\n\nExplanation:\nStub is known.\n"
        };
        Ok(HttpResponse::ok(json!({"choices": [{"text": text}], "usage": {"prompt_tokens": 10, "completion_tokens": 5}})))
    }));
    let env: HashMap<String, String> = [
        ("LLM_API_URL", "http://llm.test/v1/completions"),
        ("LLM_API_KEY", "k"),
        ("SEARCH_API_KEY", "s"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let out = folk_with(&["verify", "--strategy", "folk", "--site-restriction", "en.wikipedia.org", "--json", "Stub is a known thing."], &env, transport.clone());
    assert_eq!(out.code, 0, "{}", out.stderr);
    let trace: Value = serde_json::from_str(out.stdout.trim()).unwrap();
    assert_eq!(trace["final_label"], "SUPPORTED");
    assert_eq!(trace["citations"][0], "https://en.wikipedia.org/wiki/Stub");
    let requests = transport.requests();
    assert_eq!(requests.len(), 3);
    let search = requests.iter().find(|r| r.query_value("q").is_some()).unwrap();
    assert_eq!(search.query_value("q"), Some("en.wikipedia.org What is Stub?"));
    let llm = requests.iter().find(|r| r.body.is_some()).unwrap();
    assert!(llm.headers.iter().any(|(k, v)| k == "Authorization" && v == "Bearer k"));
}
