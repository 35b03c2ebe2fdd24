use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// How a site restriction is applied to the outgoing query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionMode {
    /// `en.wikipedia.org <question>`
    #[default]
    Prefix,
    /// `site:en.wikipedia.org <question>`
    SiteOperator,
}

pub fn build_query(question: &str, site_restriction: Option<&str>, mode: RestrictionMode) -> String {
    match site_restriction.map(str::trim).filter(|s| !s.is_empty()) {
        None => question.to_string(),
        Some(site) => match mode {
            RestrictionMode::Prefix => format!("{site} {question}"),
            RestrictionMode::SiteOperator => format!("site:{site} {question}"),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchHit {
    pub snippet: String,
    pub url: String,
}

fn text_of(value: Option<&Value>) -> Option<String> {
    match value? {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Array(items) => {
            let joined = items
                .iter()
                .filter_map(Value::as_str)
                .collect::<Vec<_>>()
                .join(", ");
            (!joined.trim().is_empty()).then_some(joined)
        }
        _ => None,
    }
}

fn url_of(value: &Value) -> String {
    value
        .get("link")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string()
}

/// Picks the top result from a search API response: the answer box when
/// present and preferred, otherwise the first organic result.
pub fn top_hit(response: &Value, prefer_answer_box: bool) -> Option<SearchHit> {
    let answer_box = response.get("answer_box").and_then(|b| {
        let snippet = text_of(b.get("answer"))
            .or_else(|| text_of(b.get("snippet")))
            .or_else(|| text_of(b.get("result")))
            .or_else(|| text_of(b.get("snippet_highlighted_words")))?;
        Some(SearchHit {
            snippet,
            url: url_of(b),
        })
    });
    let organic = response
        .get("organic_results")
        .and_then(Value::as_array)
        .and_then(|results| results.first())
        .and_then(|r| {
            Some(SearchHit {
                snippet: text_of(r.get("snippet"))?,
                url: url_of(r),
            })
        });
    if prefer_answer_box {
        answer_box.or(organic)
    } else {
        organic.or(answer_box)
    }
}

/// Cuts `text` to at most `max_chars` characters, backing off to the last
/// whitespace so no word is split.
pub fn truncate_at_word(text: &str, max_chars: usize) -> String {
    let text = text.trim();
    if text.chars().count() <= max_chars {
        return text.to_string();
    }
    let cut = text
        .char_indices()
        .nth(max_chars)
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let head = &text[..cut];
    let head = match head.rfind(char::is_whitespace) {
        Some(pos) if pos > 0 => &head[..pos],
        _ => head,
    };
    head.trim_end().to_string()
}

/// Token bucket limiting live search requests.
pub struct RateLimiter {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        let rate = requests_per_second.max(f64::MIN_POSITIVE);
        let capacity = rate.max(1.0);
        Self {
            rate,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                let refill = now.duration_since(state.1).as_secs_f64() * self.rate;
                state.0 = (state.0 + refill).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.0) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}
