//! Few-shot prompt construction and completion parsing.
//!
//! Prompts are rendered from six text assets under `templates/`. Each asset is
//! a completion-style few-shot prompt whose final block carries a `{claim}`
//! slot and, for reasoning prompts, a `{context}` slot.

mod parse;
mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fol::{squash_whitespace, PredicateClause};
use crate::grounding::GroundedQA;
use crate::label::Strategy;

pub use parse::{normalize_completion, parse_decomposition, parse_verdict, render_verdict, ParsedVerdict};
pub use templates::{
    Phase, PromptTemplate, TemplateKind, TemplateSet, CLAIM_SLOT, CONTEXT_SLOT, EXAMPLE_SEPARATOR,
    RESPONSE_CUE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("strategy `{strategy}` has no {phase} phase")]
    UnsupportedPhase { strategy: Strategy, phase: Phase },
    #[error("FOLK reasoning needs a non-empty predicate clause")]
    MissingContext,
    #[error("no follow-up questions found in the completion")]
    NoQuestions,
    #[error("direct reasoning takes no decomposition or grounded answers")]
    UnexpectedContext,
    #[error("template asset `{name}`: {reason}")]
    TemplateAsset { name: String, reason: String },
}

/// Output of the decomposition phase.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Decomposition {
    /// Present for FOLK only, and only when a predicate block parsed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicates: Option<PredicateClause>,
    pub questions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

pub fn build_decompose_prompt(
    templates: &TemplateSet,
    strategy: Strategy,
    claim: &str,
) -> Result<String, PromptError> {
    let kind = TemplateKind::for_phase(strategy, Phase::Decompose).ok_or(
        PromptError::UnsupportedPhase {
            strategy,
            phase: Phase::Decompose,
        },
    )?;
    Ok(templates.get(kind).render(claim.trim(), ""))
}

fn one_line(text: &str) -> String {
    squash_whitespace(text)
}

/// Renders the reasoning prompt with the live claim's context laid out the
/// way the template's own examples are.
///
/// * Direct: claim only.
/// * CoT: grounded answers, one per line.
/// * Self-Ask: `question answer` lines.
/// * FOLK: predicate lines, a blank line, then `question answer` lines.
pub fn build_reasoning_prompt(
    templates: &TemplateSet,
    strategy: Strategy,
    claim: &str,
    decomposition: &Decomposition,
    qa: &[GroundedQA],
) -> Result<String, PromptError> {
    let claim = claim.trim();
    let kind = TemplateKind::for_phase(strategy, Phase::Reason).expect("every strategy reasons");
    let template = templates.get(kind);
    let qa_lines = || {
        qa.iter()
            .map(|item| format!("{} {}", one_line(&item.question), one_line(&item.answer)))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let (claim_slot, context) = match strategy {
        Strategy::Direct => {
            if !qa.is_empty() || decomposition.predicates.is_some() {
                return Err(PromptError::UnexpectedContext);
            }
            (claim.to_string(), String::new())
        }
        Strategy::Cot => {
            let mut context = String::new();
            for item in qa {
                context.push_str(&one_line(&item.answer));
                context.push('\n');
            }
            (format!("{claim} ?"), context)
        }
        Strategy::SelfAsk => (format!("{claim} ?"), format!("\n{}", qa_lines())),
        Strategy::Folk => {
            let clause = decomposition
                .predicates
                .as_ref()
                .filter(|c| !c.is_empty())
                .ok_or(PromptError::MissingContext)?;
            let predicates = clause
                .predicates()
                .iter()
                .map(|p| p.render())
                .collect::<Vec<_>>()
                .join("\n");
            (format!("{claim}?"), format!("\n{predicates}\n\n{}", qa_lines()))
        }
    };
    Ok(template.render(&claim_slot, &context))
}

/// Prompt asking the model to answer a follow-up question from its own
/// knowledge; used by the grounding ablation in place of a search result.
pub fn build_self_answer_prompt(question: &str) -> String {
    format!("Answer the following question in one or two sentences.\n\nQuestion: {}\nAnswer:", one_line(question))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::parse_clause;
    use crate::grounding::Provider;

    fn qa(q: &str, a: &str) -> GroundedQA {
        GroundedQA {
            question: q.into(),
            answer: a.into(),
            source_url: String::new(),
            provider: Provider::OfflineCorpus,
        }
    }

    #[test]
    fn decompose_prompts_start_with_demo_text() {
        let set = TemplateSet::builtin();
        let cot = build_decompose_prompt(&set, Strategy::Cot, "X").unwrap();
        assert!(cot.starts_with("Please tell me the necessary questions"));
        assert!(cot.ends_with("------\nClaim: X\n>>>>>>\n"));
        let folk = build_decompose_prompt(&set, Strategy::Folk, "X").unwrap();
        assert!(folk.starts_with("You are given a problem description and a claim."));
        assert_eq!(
            build_decompose_prompt(&set, Strategy::SelfAsk, "X").unwrap(),
            cot
        );
        assert_eq!(
            build_decompose_prompt(&set, Strategy::Direct, "X"),
            Err(PromptError::UnsupportedPhase {
                strategy: Strategy::Direct,
                phase: Phase::Decompose
            })
        );
    }

    #[test]
    fn direct_reasoning_prompt() {
        let set = TemplateSet::builtin();
        let p = build_reasoning_prompt(&set, Strategy::Direct, "X", &Decomposition::default(), &[]).unwrap();
        assert!(p.starts_with("Please verify the following claim and provide explanations:"));
        assert!(p.ends_with("Claim: X\n>>>>>>\n"));
        assert_eq!(
            build_reasoning_prompt(&set, Strategy::Direct, "X", &Decomposition::default(), &[qa("q", "a")]),
            Err(PromptError::UnexpectedContext)
        );
    }

    #[test]
    fn cot_context_has_answers_only() {
        let set = TemplateSet::builtin();
        let items = [qa("Who wrote it?", "Tionne Watkins wrote it."), qa("Where?", "In Atlanta.")];
        let p = build_reasoning_prompt(&set, Strategy::Cot, "Claim text.", &Decomposition::default(), &items).unwrap();
        assert!(p.ends_with(
            "Is it true that Claim text. ?\nLet's think step by step:\n\nTionne Watkins wrote it.\nIn Atlanta.\n>>>>>>\n"
        ));
        let tail = &p[p.rfind("------").unwrap()..];
        assert!(!tail.contains("Who wrote it?"));
    }

    #[test]
    fn self_ask_context_pairs_questions_and_answers() {
        let set = TemplateSet::builtin();
        let items = [qa("Who wrote it?", "Tionne Watkins\nwrote it.")];
        let p = build_reasoning_prompt(&set, Strategy::SelfAsk, "Claim text.", &Decomposition::default(), &items).unwrap();
        assert!(p.ends_with(
            "Question: Is it true that Claim text. ?\n\nContext: \nWho wrote it? Tionne Watkins wrote it.\n>>>>>>\n"
        ));
    }

    #[test]
    fn folk_context_layout() {
        let set = TemplateSet::builtin();
        let clause = parse_clause(
            "Won(Lubabalo Kondlo, a silver medal) ::: Verify Lubabalo Kondlo won a silver medal\n\
             Inaugurated(the 2012 SportAccord World Mind Games, July 2011, Beijing) ::: Verify the 2012 SportAccord World Mind Games was inaugurated in July 2011 in Beijing.",
        )
        .unwrap()
        .clause;
        let decomposition = Decomposition {
            predicates: Some(clause),
            questions: vec!["q1?".into(), "q2?".into()],
            diagnostics: vec![],
        };
        let items = [qa("q1?", "a1."), qa("q2?", "a2.")];
        let p = build_reasoning_prompt(&set, Strategy::Folk, "C.", &decomposition, &items).unwrap();
        let expected_tail = "------\nQuestion: Is it true that C.?\n\nContext: \n\
Won(Lubabalo Kondlo, a silver medal) ::: Verify Lubabalo Kondlo won a silver medal\n\
Inaugurated(the 2012 SportAccord World Mind Games, July 2011, Beijing) ::: Verify the 2012 SportAccord World Mind Games was inaugurated in July 2011 in Beijing.\n\
\n\
q1? a1.\n\
q2? a2.\n\
>>>>>>\n";
        assert!(p.ends_with(expected_tail), "{}", &p[p.len() - 400..]);

        assert_eq!(
            build_reasoning_prompt(&set, Strategy::Folk, "C.", &Decomposition::default(), &items),
            Err(PromptError::MissingContext)
        );
    }

    #[test]
    fn separator_discipline() {
        let set = TemplateSet::builtin();
        let prompts = [
            build_decompose_prompt(&set, Strategy::Cot, "A claim.").unwrap(),
            build_decompose_prompt(&set, Strategy::Folk, "A claim.").unwrap(),
            build_reasoning_prompt(&set, Strategy::Direct, "A claim.", &Decomposition::default(), &[]).unwrap(),
        ];
        for p in prompts {
            assert_eq!(p.lines().filter(|l| *l == RESPONSE_CUE).count(), p.lines().filter(|l| *l == EXAMPLE_SEPARATOR).count() + 1);
            assert!(p.ends_with(">>>>>>\n"));
        }
    }
}
