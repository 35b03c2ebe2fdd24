use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, GatewayError};
use crate::prompt::EXAMPLE_SEPARATOR;

/// One scripted answer. With `contains` set the rule is reusable and matches
/// requests whose live query (the prompt text after the last example
/// separator) contains that substring; without it the rule is consumed once,
/// in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub completion: String,
}

type Responder = dyn Fn(&CompletionRequest) -> Option<String> + Send + Sync;

enum Script {
    Rules {
        keyed: Vec<ScriptRule>,
        queue: Mutex<VecDeque<String>>,
    },
    Responder(Box<Responder>),
}

/// Deterministic stand-in for a model.
pub struct ScriptedBackend {
    script: Script,
}

/// The part of a few-shot prompt that belongs to the live request.
pub fn live_query(prompt: &str) -> &str {
    let marker = format!("\n{EXAMPLE_SEPARATOR}\n");
    match prompt.rfind(&marker) {
        Some(pos) => &prompt[pos + marker.len()..],
        None => prompt,
    }
}

impl ScriptedBackend {
    /// Answers calls with `completions` in order.
    pub fn queue<S: Into<String>>(completions: impl IntoIterator<Item = S>) -> Self {
        Self::from_rules(completions.into_iter().map(|c| ScriptRule {
            contains: None,
            completion: c.into(),
        }))
    }

    pub fn from_rules(rules: impl IntoIterator<Item = ScriptRule>) -> Self {
        let mut keyed = Vec::new();
        let mut queue = VecDeque::new();
        for rule in rules {
            match rule.contains {
                Some(_) => keyed.push(rule),
                None => queue.push_back(rule.completion),
            }
        }
        Self {
            script: Script::Rules {
                keyed,
                queue: Mutex::new(queue),
            },
        }
    }

    pub fn responder(f: impl Fn(&CompletionRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        Self {
            script: Script::Responder(Box::new(f)),
        }
    }

    /// Loads newline-delimited [`ScriptRule`] objects.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::StorageFailure(format!("{}: {e}", path.display())))?;
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rule = serde_json::from_str(line).map_err(|e| {
                GatewayError::StorageFailure(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            rules.push(rule);
        }
        Ok(Self::from_rules(rules))
    }

    pub fn answer(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        match &self.script {
            Script::Responder(f) => f(request).ok_or(GatewayError::ScriptExhausted),
            Script::Rules { keyed, queue } => {
                let query = live_query(&request.prompt);
                if let Some(rule) = keyed
                    .iter()
                    .find(|r| r.contains.as_deref().is_some_and(|c| query.contains(c)))
                {
                    return Ok(rule.completion.clone());
                }
                queue
                    .lock()
                    .expect("script queue poisoned")
                    .pop_front()
                    .ok_or(GatewayError::ScriptExhausted)
            }
        }
    }
}
