use std::fmt::Write as _;

use folk_core::pipeline::{ConsistencyFlag, VerdictTrace};

fn consistency(flag: ConsistencyFlag) -> &'static str {
    match flag {
        ConsistencyFlag::Consistent => "consistent",
        ConsistencyFlag::LabelClauseMismatch => "label/clause mismatch",
        ConsistencyFlag::NotApplicable => "n/a",
    }
}

/// Human-readable verdict: predicates, question answering, prediction,
/// explanation, sources.
pub fn verdict(t: &VerdictTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Claim: {}", t.claim.text);
    let _ = writeln!(out, "Strategy: {}", t.strategy.display_name());
    if let Some(v) = &t.variant {
        let _ = writeln!(out, "Variant: {v}");
    }
    if let Some(clause) = &t.decomposition.predicates {
        let _ = writeln!(out, "\nPredicates:");
        for p in clause.predicates() {
            let _ = writeln!(out, "  {}", p.render());
        }
    }
    if !t.grounded.is_empty() {
        let _ = writeln!(out, "\nQuestion Answering:");
        for qa in &t.grounded {
            let _ = writeln!(out, "  Q: {}", qa.question);
            let _ = writeln!(out, "  A: {}", qa.answer);
        }
    } else if !t.decomposition.questions.is_empty() {
        let _ = writeln!(out, "\nQuestions:");
        for q in &t.decomposition.questions {
            let _ = writeln!(out, "  {q}");
        }
    }
    let _ = writeln!(out, "\nPrediction:");
    if !t.parsed.predicate_judgments.is_empty() {
        let width = t.parsed.predicate_judgments.iter().map(|(id, _)| id.head().chars().count()).max().unwrap_or(0);
        for (id, j) in t.parsed.predicate_judgments.iter() {
            let _ = writeln!(out, "  {:<width$}  {}", id.head(), j.value);
        }
    }
    if let Some(v) = t.clause_value {
        let _ = writeln!(out, "  clause: {v} ({})", consistency(t.consistency_flag));
    }
    let _ = writeln!(out, "  label: {}", t.final_label);
    if !t.parsed.explanation.is_empty() {
        let _ = writeln!(out, "\nExplanation:\n  {}", t.parsed.explanation.replace('\n', "\n  "));
    }
    if !t.citations.is_empty() {
        let _ = writeln!(out, "\nSources:");
        for url in &t.citations {
            let _ = writeln!(out, "  {url}");
        }
    }
    out
}

/// One line per captured error, for the diagnostic stream.
pub fn errors(t: &VerdictTrace) -> String {
    t.errors
        .iter()
        .map(|e| format!("{}: {:?} {}: {}\n", t.claim.id, e.stage, e.kind, e.message))
        .collect()
}
