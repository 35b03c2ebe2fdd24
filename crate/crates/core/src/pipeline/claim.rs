use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::label::GoldLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Dataset {
    #[serde(rename = "HoVER")]
    Hover,
    #[serde(rename = "FEVEROUS")]
    Feverous,
    #[serde(rename = "SciFact-Open")]
    SciFactOpen,
    #[default]
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Challenge {
    #[serde(rename = "2hop")]
    TwoHop,
    #[serde(rename = "3hop")]
    ThreeHop,
    #[serde(rename = "4hop")]
    FourHop,
    #[serde(rename = "numerical")]
    Numerical,
    #[serde(rename = "multihop")]
    Multihop,
    #[serde(rename = "text_and_table")]
    TextAndTable,
    #[serde(rename = "scientific")]
    Scientific,
    #[serde(rename = "none")]
    #[default]
    None,
}

impl Challenge {
    pub const ALL: [Challenge; 8] = [
        Self::TwoHop,
        Self::ThreeHop,
        Self::FourHop,
        Self::Numerical,
        Self::Multihop,
        Self::TextAndTable,
        Self::Scientific,
        Self::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TwoHop => "2hop",
            Self::ThreeHop => "3hop",
            Self::FourHop => "4hop",
            Self::Numerical => "numerical",
            Self::Multihop => "multihop",
            Self::TextAndTable => "text_and_table",
            Self::Scientific => "scientific",
            Self::None => "none",
        }
    }

    pub fn from_hops(hops: u64) -> Option<Self> {
        match hops {
            2 => Some(Self::TwoHop),
            3 => Some(Self::ThreeHop),
            4 => Some(Self::FourHop),
            _ => None,
        }
    }
}

impl fmt::Display for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Challenge {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .or(match key.as_str() {
                "two_hop" | "2_hop" => Some(Self::TwoHop),
                "three_hop" | "3_hop" => Some(Self::ThreeHop),
                "four_hop" | "4_hop" => Some(Self::FourHop),
                "multi_hop" | "multi_hop_reasoning" => Some(Self::Multihop),
                "numerical_reasoning" => Some(Self::Numerical),
                "text_table" | "combining_tables_and_text" => Some(Self::TextAndTable),
                _ => None,
            })
            .ok_or_else(|| format!("unknown challenge `{s}`"))
    }
}

/// One dataset instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub gold_label: GoldLabel,
    #[serde(default)]
    pub dataset: Dataset,
    #[serde(default)]
    pub challenge: Challenge,
}

impl Claim {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold_label: GoldLabel::Unlabeled,
            dataset: Dataset::Custom,
            challenge: Challenge::None,
        }
    }

    pub fn with_gold(mut self, gold: GoldLabel) -> Self {
        self.gold_label = gold;
        self
    }

    pub fn with_challenge(mut self, challenge: Challenge) -> Self {
        self.challenge = challenge;
        self
    }
}
