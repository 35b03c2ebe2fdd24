use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{CompletionRequest, GatewayError, TokenUsage};

/// Wire mapping between [`CompletionRequest`] and a JSON completions API.
///
/// Pointers are RFC 6901 JSON pointers into the response body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterMapping {
    pub model_field: String,
    pub prompt_field: String,
    pub max_tokens_field: String,
    pub temperature_field: String,
    pub stop_field: String,
    pub text_pointer: String,
    pub prompt_tokens_pointer: String,
    pub completion_tokens_pointer: String,
    pub auth_header: String,
    pub auth_scheme: String,
}

impl Default for AdapterMapping {
    fn default() -> Self {
        Self::openai_completions()
    }
}

impl AdapterMapping {
    /// OpenAI-style `/v1/completions`.
    pub fn openai_completions() -> Self {
        Self {
            model_field: "model".into(),
            prompt_field: "prompt".into(),
            max_tokens_field: "max_tokens".into(),
            temperature_field: "temperature".into(),
            stop_field: "stop".into(),
            text_pointer: "/choices/0/text".into(),
            prompt_tokens_pointer: "/usage/prompt_tokens".into(),
            completion_tokens_pointer: "/usage/completion_tokens".into(),
            auth_header: "Authorization".into(),
            auth_scheme: "Bearer".into(),
        }
    }

    /// Parses a TOML mapping; missing keys keep the OpenAI defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Config(format!("adapter mapping: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        let mut body = Map::new();
        let mut put = |field: &str, value: Value| {
            if !field.is_empty() {
                body.insert(field.to_string(), value);
            }
        };
        put(&self.model_field, Value::from(request.model_id.as_str()));
        put(&self.prompt_field, Value::from(request.prompt.as_str()));
        put(&self.max_tokens_field, Value::from(request.max_tokens));
        put(&self.temperature_field, Value::from(request.temperature));
        if !request.stop_sequences.is_empty() {
            put(&self.stop_field, Value::from(request.stop_sequences.clone()));
        }
        Value::Object(body)
    }

    pub fn auth_value(&self, api_key: &str) -> String {
        if self.auth_scheme.is_empty() {
            api_key.to_string()
        } else {
            format!("{} {api_key}", self.auth_scheme)
        }
    }

    pub fn parse_response(&self, body: &Value) -> Result<(String, Option<TokenUsage>), GatewayError> {
        let text = body
            .pointer(&self.text_pointer)
            .and_then(Value::as_str)
            .ok_or_else(|| {
                GatewayError::MalformedResponse(format!("no string at `{}`", self.text_pointer))
            })?;
        let count = |ptr: &str| body.pointer(ptr).and_then(Value::as_u64);
        let usage = match (count(&self.prompt_tokens_pointer), count(&self.completion_tokens_pointer)) {
            (Some(prompt_tokens), Some(completion_tokens)) => Some(TokenUsage {
                prompt_tokens,
                completion_tokens,
            }),
            _ => None,
        };
        Ok((text.to_string(), usage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn openai_body_and_response() {
        let mapping = AdapterMapping::openai_completions();
        let req = CompletionRequest::new("text-davinci-003", "Claim: x\n>>>>>>\n")
            .with_max_tokens(256)
            .with_stops(vec!["------".into()]);
        assert_eq!(
            mapping.request_body(&req),
            json!({
                "model": "text-davinci-003",
                "prompt": "Claim: x\n>>>>>>\n",
                "max_tokens": 256,
                "temperature": 0.0,
                "stop": ["------"]
            })
        );
        let (text, usage) = mapping
            .parse_response(&json!({
                "choices": [{"text": " done"}],
                "usage": {"prompt_tokens": 10, "completion_tokens": 2}
            }))
            .unwrap();
        assert_eq!(text, " done");
        assert_eq!(usage, Some(TokenUsage { prompt_tokens: 10, completion_tokens: 2 }));
        assert!(mapping.parse_response(&json!({"choices": []})).is_err());
    }

    #[test]
    fn toml_overrides() {
        let mapping = AdapterMapping::from_toml_str(
            "prompt_field = \"inputs\"\ntext_pointer = \"/generated_text\"\nmodel_field = \"\"\n",
        )
        .unwrap();
        let body = mapping.request_body(&CompletionRequest::new("m", "p"));
        assert_eq!(body.get("inputs"), Some(&json!("p")));
        assert!(body.get("model").is_none());
        assert_eq!(mapping.parse_response(&json!({"generated_text": "t"})).unwrap().0, "t");
        assert_eq!(mapping.auth_value("k"), "Bearer k");
    }
}
