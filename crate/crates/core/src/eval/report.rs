use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    confusion, krippendorff_alpha, macro_f1, mean_average_rank, AlphaMetric, AlphaResult, Confusion, Criterion,
    EvalError, MarTable, RankingSheet,
};
use crate::label::{GoldLabel, Label};
use crate::pipeline::{BatchOutput, Challenge, Claim};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeScore {
    pub macro_f1: f64,
    pub confusion: Confusion,
    pub unknown_count: usize,
    pub scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScores {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_digest: Option<String>,
    pub per_challenge: BTreeMap<Challenge, ChallengeScore>,
    pub overall: ChallengeScore,
    /// Claims left out because their gold label is unknown.
    pub skipped: usize,
}

fn score(pred: &[Label], gold: &[Label]) -> ChallengeScore {
    let c = confusion(pred, gold).expect("inputs are paired and gold is determinate");
    ChallengeScore {
        macro_f1: macro_f1(pred, gold).expect("inputs are paired and gold is determinate"),
        confusion: c,
        unknown_count: c.unknown(),
        scored: c.total(),
    }
}

/// Scores `(claim, predicted label)` pairs, grouped by challenge.
pub fn score_system(name: &str, scored: &[(Claim, Label)], manifest_digest: Option<String>) -> SystemScores {
    let mut groups: BTreeMap<Challenge, (Vec<Label>, Vec<Label>)> = BTreeMap::new();
    let (mut all_pred, mut all_gold) = (Vec::new(), Vec::new());
    let mut skipped = 0;
    for (claim, pred) in scored {
        let Some(gold) = claim.gold_label.as_label() else {
            skipped += 1;
            continue;
        };
        let g = groups.entry(claim.challenge).or_default();
        g.0.push(*pred);
        g.1.push(gold);
        all_pred.push(*pred);
        all_gold.push(gold);
    }
    SystemScores {
        name: name.to_string(),
        manifest_digest,
        per_challenge: groups.iter().map(|(c, (p, g))| (*c, score(p, g))).collect(),
        overall: score(&all_pred, &all_gold),
        skipped,
    }
}

impl SystemScores {
    /// Scores a run file. `gold` overrides the gold labels carried in the traces.
    pub fn from_run(name: &str, run: &BatchOutput, gold: Option<&HashMap<String, GoldLabel>>) -> Self {
        let pairs: Vec<(Claim, Label)> = run
            .traces
            .iter()
            .map(|t| {
                let mut claim = t.claim.clone();
                if let Some(g) = gold.and_then(|m| m.get(&claim.id)) {
                    claim.gold_label = *g;
                }
                (claim, t.final_label)
            })
            .collect();
        let manifest = serde_json::to_string(&run.manifest).expect("manifest serializes");
        score_system(name, &pairs, Some(crate::digest::sha256_hex(manifest.as_bytes())))
    }

    /// Scores externally produced predictions against `claims`. Claims with no
    /// prediction count as Unknown.
    pub fn from_predictions(name: &str, predictions: &[Prediction], claims: &[Claim]) -> Self {
        let by_id: HashMap<&str, Label> = predictions.iter().map(|p| (p.id.as_str(), p.label)).collect();
        let pairs: Vec<(Claim, Label)> = claims
            .iter()
            .map(|c| (c.clone(), by_id.get(c.id.as_str()).copied().unwrap_or(Label::Unknown)))
            .collect();
        score_system(name, &pairs, None)
    }
}

/// One line of an external predictions file: `{"id": ..., "label": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        #[derive(Deserialize)]
        struct Raw {
            id: serde_json::Value,
            label: String,
        }
        let fail = |message: String| EvalError::FormatError {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let raw: Raw = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
        let id = match raw.id {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        let label = GoldLabel::from_source(&raw.label)
            .and_then(GoldLabel::as_label)
            .unwrap_or(Label::Unknown);
        out.push(Prediction { id, label });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub mar: MarTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub systems: Vec<SystemScores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explanation: Vec<CriterionReport>,
}

fn column_title(c: Challenge) -> (&'static str, &'static str) {
    match c {
        Challenge::TwoHop => ("HoVER", "2-Hop"),
        Challenge::ThreeHop => ("HoVER", "3-Hop"),
        Challenge::FourHop => ("HoVER", "4-Hop"),
        Challenge::Numerical => ("FEVEROUS", "Numerical"),
        Challenge::Multihop => ("FEVEROUS", "Multi-hop"),
        Challenge::TextAndTable => ("FEVEROUS", "Text and Table"),
        Challenge::Scientific => ("SciFact-Open", ""),
        Challenge::None => ("Other", ""),
    }
}

impl EvalReport {
    pub fn add_rankings(&mut self, sheet: &RankingSheet, metric: AlphaMetric) -> Result<(), EvalError> {
        for criterion in sheet.criteria() {
            let mar = mean_average_rank(sheet, criterion)?;
            let (alpha, alpha_error) = match krippendorff_alpha(sheet, criterion, metric) {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            };
            self.explanation.push(CriterionReport {
                criterion,
                mar,
                alpha,
                alpha_error,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Macro-F1 (as a percentage) with systems as rows and challenges as
    /// columns, followed by the explanation-quality tables.
    pub fn render_table(&self) -> String {
        const NAME: usize = 12;
        const CELL: usize = 15;
        let challenges: BTreeSet<Challenge> = self.systems.iter().flat_map(|s| s.per_challenge.keys().copied()).collect();
        let mut out = String::new();
        let mut header1 = format!("{:<NAME$}", "");
        let mut header2 = format!("{:<NAME$}", "");
        let mut last_group = "";
        for c in &challenges {
            let (group, title) = column_title(*c);
            header1.push_str(&format!("|{:^CELL$}", if group != last_group { group } else { "" }));
            header2.push_str(&format!("|{:^CELL$}", title));
            last_group = group;
        }
        header1.push_str(&format!("|{:^CELL$}", "Overall"));
        header2.push_str(&format!("|{:^CELL$}", ""));
        let _ = writeln!(out, "{}", header1.trim_end());
        let _ = writeln!(out, "{}", header2.trim_end());
        let _ = writeln!(out, "{}", "-".repeat(NAME + (CELL + 1) * (challenges.len() + 1)));
        for s in &self.systems {
            let mut line = format!("{:<NAME$}", s.name);
            for c in &challenges {
                let cell = s
                    .per_challenge
                    .get(c)
                    .map(|sc| format!("{:.2}", sc.macro_f1 * 100.0))
                    .unwrap_or_else(|| "-".to_string());
                line.push_str(&format!("|{cell:^CELL$}"));
            }
            line.push_str(&format!("|{:^CELL$}", format!("{:.2}", s.overall.macro_f1 * 100.0)));
            let _ = writeln!(out, "{}", line.trim_end());
        }
        let unknown: usize = self.systems.iter().map(|s| s.overall.unknown_count).sum();
        if unknown > 0 {
            let _ = writeln!(out, "({unknown} Unknown prediction(s) scored as incorrect)");
        }
        for cr in &self.explanation {
            let systems: Vec<&String> = cr.mar.systems.keys().collect();
            let annotators: BTreeSet<&String> = cr.mar.systems.values().flat_map(|e| e.per_annotator.keys()).collect();
            let _ = writeln!(out, "\nMean Average Rank ({})", cr.criterion);
            let mut head = format!("{:<NAME$}", "Annotator");
            for s in &systems {
                head.push_str(&format!("|{s:^CELL$}"));
            }
            let _ = writeln!(out, "{}", head.trim_end());
            for a in &annotators {
                let mut line = format!("{a:<NAME$}");
                for s in &systems {
                    let v = cr.mar.systems[*s].per_annotator.get(*a).map(|v| format!("{v:.2}")).unwrap_or_default();
                    line.push_str(&format!("|{v:^CELL$}"));
                }
                let _ = writeln!(out, "{}", line.trim_end());
            }
            let mut avg = format!("{:<NAME$}", "Avg");
            for s in &systems {
                avg.push_str(&format!("|{:^CELL$}", format!("{:.2}", cr.mar.systems[*s].average)));
            }
            let _ = writeln!(out, "{}", avg.trim_end());
            match (&cr.alpha, &cr.alpha_error) {
                (Some(a), _) => {
                    let metric = match a.metric {
                        AlphaMetric::Ordinal => "ordinal",
                        AlphaMetric::Interval => "interval",
                    };
                    let _ = writeln!(out, "Krippendorff's alpha ({metric}): {:.3}", a.alpha);
                }
                (None, Some(e)) => {
                    let _ = writeln!(out, "Krippendorff's alpha: n/a ({e})");
                }
                _ => {}
            }
        }
        out
    }
}
