use serde::{Deserialize, Serialize};

use super::{Decomposition, PromptError, EXAMPLE_SEPARATOR, RESPONSE_CUE};
use crate::fol::{
    parse_clause, render_clause, scan_head, Judgment, Predicate, PredicateClause, TruthAssignment,
    TruthValue,
};
use crate::label::{Label, Strategy};

const QUESTION_PREFIXES: [&str; 2] = ["Followup Question:", "Follow-up Question:"];
const PREDICATES_HEADER: &str = "Predicates:";
const EXPLANATION_HEADER: &str = "Explanation:";
const REASONS_MARKER: &str = "Here are the reasons";

/// CRLF to LF, trailing whitespace stripped from every line, and everything
/// from the first example separator on dropped.
pub fn normalize_completion(completion: &str) -> String {
    let unified = completion.replace("\r\n", "\n").replace('\r', "\n");
    let mut out = Vec::new();
    for line in unified.lines() {
        let line = line.trim_end();
        if line.trim() == EXAMPLE_SEPARATOR {
            break;
        }
        out.push(line);
    }
    out.join("\n")
}

fn strip_question(line: &str) -> Option<&str> {
    let line = line.trim_start();
    QUESTION_PREFIXES
        .iter()
        .find_map(|p| line.strip_prefix(p))
        .map(str::trim)
}

pub fn parse_decomposition(strategy: Strategy, completion: &str) -> Result<Decomposition, PromptError> {
    if strategy == Strategy::Direct {
        return Err(PromptError::UnsupportedPhase {
            strategy,
            phase: super::Phase::Decompose,
        });
    }
    let text = normalize_completion(completion);
    let questions: Vec<String> = text
        .lines()
        .filter_map(strip_question)
        .filter(|q| !q.is_empty())
        .map(str::to_string)
        .collect();
    if questions.is_empty() {
        return Err(PromptError::NoQuestions);
    }
    let mut decomposition = Decomposition {
        predicates: None,
        questions,
        diagnostics: Vec::new(),
    };
    if strategy != Strategy::Folk {
        return Ok(decomposition);
    }

    let mut lines = text.lines();
    let mut block = Vec::new();
    let mut found_header = false;
    for line in lines.by_ref() {
        if let Some(rest) = line.trim_start().strip_prefix(PREDICATES_HEADER) {
            found_header = true;
            if !rest.trim().is_empty() {
                block.push(rest);
            }
            break;
        }
    }
    if found_header {
        block.extend(lines.take_while(|l| strip_question(l).is_none()));
    }
    if !found_header {
        decomposition
            .diagnostics
            .push("no `Predicates:` block in the decomposition".to_string());
        return Ok(decomposition);
    }
    match parse_clause(&block.join("\n")) {
        Ok(parsed) => {
            decomposition.diagnostics.extend(parsed.diagnostics);
            if parsed.clause.len() != decomposition.questions.len() {
                decomposition.diagnostics.push(format!(
                    "{} predicates but {} follow-up questions",
                    parsed.clause.len(),
                    decomposition.questions.len()
                ));
            }
            decomposition.predicates = Some(parsed.clause);
        }
        Err(e) => {
            decomposition.diagnostics.push(format!("predicate block unusable: {e}"));
            if let crate::fol::FolError::EmptyClause { diagnostics } = e {
                decomposition.diagnostics.extend(diagnostics);
            }
        }
    }
    Ok(decomposition)
}

/// Verdict extracted from a reasoning completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedVerdict {
    pub label: Label,
    /// Per-predicate judgments in the order the model stated them (FOLK only).
    pub predicate_judgments: TruthAssignment,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

fn label_token(inner: &str) -> Option<Label> {
    match inner {
        "SUPPORTED" | "SUPPORTS" | "SUPPORT" => Some(Label::Supported),
        "NOT_SUPPORTED" | "REFUTED" | "REFUTES" | "REFUTE" => Some(Label::NotSupported),
        _ => None,
    }
}

/// Bracketed label tokens in order of appearance.
fn label_tokens(text: &str) -> Vec<Label> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('[') {
        let tail = &rest[open + 1..];
        match tail.find(']') {
            Some(close) => {
                if let Some(label) = label_token(&tail[..close]) {
                    out.push(label);
                }
                rest = &tail[close + 1..];
            }
            None => break,
        }
    }
    out
}

fn has_top_level_conjunction(line: &str) -> bool {
    let mut depth = 0i32;
    let bytes = line.as_bytes();
    for i in 0..bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'&' if depth == 0 && bytes.get(i + 1) == Some(&b'&') => return true,
            _ => {}
        }
    }
    false
}

/// `Head(args) is True because reason` style line.
fn parse_judgment_line(line: &str) -> Option<(Predicate, Judgment)> {
    let (name, args, end) = scan_head(line).ok()?;
    let predicate = Predicate::new(&name, &args, "").ok()?;
    let rest = line[end..].trim_start();
    let unparsed = || Judgment::new(TruthValue::Unknown, Some(line.to_string()));
    let Some(after_is) = rest.strip_prefix("is ") else {
        return Some((predicate, unparsed()));
    };
    let word_end = after_is
        .find(|c: char| !c.is_alphabetic())
        .unwrap_or(after_is.len());
    let value = match after_is[..word_end].to_ascii_lowercase().as_str() {
        "true" => TruthValue::True,
        "false" => TruthValue::False,
        "unknown" => TruthValue::Unknown,
        _ => return Some((predicate, unparsed())),
    };
    let tail = after_is[word_end..].trim();
    let reason = if let Some(reason) = tail.strip_prefix("because") {
        Some(reason.trim().to_string())
    } else if tail.is_empty() || tail == "." {
        None
    } else {
        return Some((predicate, unparsed()));
    };
    Some((predicate, Judgment::new(value, reason)))
}

fn explanation_after<'a>(text: &'a str, marker: &str, separators: &[char]) -> Option<&'a str> {
    let pos = text.find(marker)?;
    let rest = &text[pos + marker.len()..];
    let rest = rest
        .strip_prefix(|c: char| separators.contains(&c))
        .unwrap_or(rest);
    Some(rest.trim())
}

pub fn parse_verdict(strategy: Strategy, completion: &str) -> ParsedVerdict {
    let text = normalize_completion(completion);
    let mut diagnostics = Vec::new();

    let tokens = label_tokens(&text);
    let label = tokens.first().copied().unwrap_or(Label::Unknown);
    if tokens.iter().any(|t| *t != label) {
        diagnostics.push(format!(
            "completion states conflicting labels; using the first ({label})"
        ));
    }

    let (reasoning, explanation) = match text.find(EXPLANATION_HEADER) {
        Some(pos) => (&text[..pos], explanation_after(&text[pos..], EXPLANATION_HEADER, &[])),
        None => (text.as_str(), explanation_after(&text, REASONS_MARKER, &[':', ','])),
    };
    let explanation = explanation.unwrap_or_default().to_string();

    let mut judgments = TruthAssignment::new();
    if strategy == Strategy::Folk {
        for line in reasoning.lines().map(str::trim) {
            if line.is_empty() || has_top_level_conjunction(line) {
                continue;
            }
            if let Some((predicate, judgment)) = parse_judgment_line(line) {
                if judgments.get(&predicate.id()).is_some() {
                    diagnostics.push(format!("predicate `{}` judged twice; keeping the first", predicate.head()));
                    continue;
                }
                judgments.set(predicate.id(), judgment);
            }
        }
    }

    ParsedVerdict {
        label,
        predicate_judgments: judgments,
        explanation,
        diagnostics,
    }
}

/// Writes a verdict back out in the completion layout its strategy's
/// examples use. Parsing the result yields the same verdict.
pub fn render_verdict(strategy: Strategy, verdict: &ParsedVerdict) -> String {
    let token = |label: Label| match label {
        Label::Unknown => String::new(),
        other => format!("[{}]", other.as_str()),
    };
    let mut out = String::new();
    match strategy {
        Strategy::Folk => {
            out.push_str("Prediction:\n");
            let mut predicates = Vec::new();
            for (id, judgment) in verdict.predicate_judgments.iter() {
                out.push_str(&id.head());
                out.push_str(" is ");
                out.push_str(&judgment.value.to_string());
                match &judgment.reason {
                    Some(reason) => {
                        out.push_str(" because ");
                        out.push_str(reason);
                    }
                    None => out.push('.'),
                }
                out.push('\n');
                predicates.push(Predicate::new(&id.name, &id.args, "").expect("identity came from a predicate"));
            }
            // a one-predicate summary would read as a second judgment line
            if let Some((clause, _)) = PredicateClause::new(predicates).ok().filter(|(c, _)| c.len() > 1) {
                let value = crate::fol::evaluate_clause(&clause, &verdict.predicate_judgments)
                    .unwrap_or(TruthValue::Unknown);
                out.push_str(&format!("{} is {value}.\n", render_clause(&clause)));
            }
            if verdict.label.is_determinate() {
                out.push_str(&format!("The claim is {}.\n", token(verdict.label)));
            }
            if !verdict.explanation.is_empty() {
                out.push_str(&format!("\n{EXPLANATION_HEADER}\n{}\n", verdict.explanation));
            }
        }
        Strategy::Direct | Strategy::Cot | Strategy::SelfAsk => {
            let lead = match strategy {
                Strategy::Direct => "This claim is: ",
                Strategy::Cot => "Therefore, the answer is: ",
                _ => "The claim is ",
            };
            if verdict.label.is_determinate() {
                out.push_str(lead);
                out.push_str(&token(verdict.label));
                out.push('\n');
            }
            if !verdict.explanation.is_empty() {
                out.push_str(&format!("{REASONS_MARKER}: {}\n", verdict.explanation));
            }
        }
    }
    debug_assert!(!out.contains(RESPONSE_CUE));
    out
}
