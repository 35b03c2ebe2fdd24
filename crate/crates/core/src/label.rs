use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A verdict as produced by a pipeline. `Unknown` marks a run that produced
/// no determinate answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "SUPPORTED")]
    Supported,
    #[serde(rename = "NOT_SUPPORTED")]
    NotSupported,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Supported => "SUPPORTED",
            Self::NotSupported => "NOT_SUPPORTED",
            Self::Unknown => "UNKNOWN",
        }
    }

    pub fn is_determinate(self) -> bool {
        self != Self::Unknown
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference label attached to a dataset claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum GoldLabel {
    #[serde(rename = "SUPPORTED")]
    Supported,
    #[serde(rename = "NOT_SUPPORTED")]
    NotSupported,
    #[serde(rename = "UNLABELED")]
    #[default]
    Unlabeled,
}

impl GoldLabel {
    pub fn as_label(self) -> Option<Label> {
        match self {
            Self::Supported => Some(Label::Supported),
            Self::NotSupported => Some(Label::NotSupported),
            Self::Unlabeled => None,
        }
    }

    /// Maps the label spellings found across fact-checking datasets.
    pub fn from_source(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_uppercase().replace([' ', '-'], "_").as_str() {
            "SUPPORTED" | "SUPPORTS" | "SUPPORT" => Some(Self::Supported),
            "NOT_SUPPORTED" | "REFUTES" | "REFUTE" | "REFUTED" | "CONTRADICT" => {
                Some(Self::NotSupported)
            }
            _ => None,
        }
    }
}

impl fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Supported => "SUPPORTED",
            Self::NotSupported => "NOT_SUPPORTED",
            Self::Unlabeled => "UNLABELED",
        })
    }
}

/// The four prompting pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Folk,
    Direct,
    Cot,
    #[serde(rename = "selfask")]
    SelfAsk,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Self::Direct, Self::Cot, Self::SelfAsk, Self::Folk];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Folk => "folk",
            Self::Direct => "direct",
            Self::Cot => "cot",
            Self::SelfAsk => "selfask",
        }
    }

    /// Row title used in score tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::Folk => "FOLK",
            Self::Direct => "Direct",
            Self::Cot => "CoT",
            Self::SelfAsk => "Self-Ask",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "folk" => Ok(Self::Folk),
            "direct" => Ok(Self::Direct),
            "cot" | "chainofthought" => Ok(Self::Cot),
            "selfask" => Ok(Self::SelfAsk),
            other => Err(format!("unknown strategy `{other}` (expected direct, cot, selfask or folk)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_label_mapping() {
        assert_eq!(GoldLabel::from_source("SUPPORTS"), Some(GoldLabel::Supported));
        assert_eq!(GoldLabel::from_source("REFUTES"), Some(GoldLabel::NotSupported));
        assert_eq!(GoldLabel::from_source("not_supported"), Some(GoldLabel::NotSupported));
        assert_eq!(GoldLabel::from_source("NOT ENOUGH INFO"), None);
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
        assert_eq!("Self-Ask".parse::<Strategy>().unwrap(), Strategy::SelfAsk);
        assert!("react".parse::<Strategy>().is_err());
    }
}
