use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Coverage,
    Soundness,
    Readability,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Self::Coverage, Self::Soundness, Self::Readability];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Coverage => "coverage",
            Self::Soundness => "soundness",
            Self::Readability => "readability",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| format!("unknown criterion `{s}`"))
    }
}

/// One CSV row: `annotator,item,criterion,system,rank`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRow {
    pub annotator: String,
    pub item: String,
    pub criterion: Criterion,
    pub system: String,
    pub rank: u32,
}

/// Explanation rankings for one or more criteria. Ties are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RankingSheet {
    rows: Vec<RankRow>,
}

type Cells = BTreeMap<(String, String, String), u32>;

impl RankingSheet {
    pub fn new(rows: Vec<RankRow>) -> Result<Self, EvalError> {
        let sheet = Self { rows };
        for criterion in sheet.criteria() {
            sheet.cells(criterion)?;
        }
        Ok(sheet)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, EvalError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| EvalError::InvalidSheet(e.to_string()))?.clone();
        let expected = ["annotator", "item", "criterion", "system", "rank"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(EvalError::InvalidSheet(format!("header must be {}", expected.join(","))));
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.deserialize::<RankRow>().enumerate() {
            rows.push(record.map_err(|e| EvalError::InvalidSheet(format!("row {}: {e}", i + 2)))?);
        }
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let file = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn rows(&self) -> &[RankRow] {
        &self.rows
    }

    pub fn criteria(&self) -> BTreeSet<Criterion> {
        self.rows.iter().map(|r| r.criterion).collect()
    }

    /// (annotator, item, system) → rank for one criterion, checked for
    /// completeness and range.
    fn cells(&self, criterion: Criterion) -> Result<Cells, EvalError> {
        let rows: Vec<&RankRow> = self.rows.iter().filter(|r| r.criterion == criterion).collect();
        let annotators: BTreeSet<&str> = rows.iter().map(|r| r.annotator.as_str()).collect();
        let items: BTreeSet<&str> = rows.iter().map(|r| r.item.as_str()).collect();
        let systems: BTreeSet<&str> = rows.iter().map(|r| r.system.as_str()).collect();
        let mut cells = Cells::new();
        for r in &rows {
            if r.rank == 0 || r.rank as usize > systems.len() {
                return Err(EvalError::InvalidSheet(format!(
                    "{criterion}: rank {} outside 1..={} ({}, {}, {})",
                    r.rank,
                    systems.len(),
                    r.annotator,
                    r.item,
                    r.system
                )));
            }
            let key = (r.annotator.clone(), r.item.clone(), r.system.clone());
            if cells.insert(key, r.rank).is_some() {
                return Err(EvalError::InvalidSheet(format!(
                    "{criterion}: duplicate cell ({}, {}, {})",
                    r.annotator, r.item, r.system
                )));
            }
        }
        let expected = annotators.len() * items.len() * systems.len();
        if cells.len() != expected {
            return Err(EvalError::InvalidSheet(format!(
                "{criterion}: {} of {expected} (annotator, item, system) cells filled",
                cells.len()
            )));
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarEntry {
    pub per_annotator: BTreeMap<String, f64>,
    /// Mean of the per-annotator values.
    pub average: f64,
}

/// system → mean average rank, for one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarTable {
    pub criterion: Criterion,
    pub systems: BTreeMap<String, MarEntry>,
}

pub fn mean_average_rank(sheet: &RankingSheet, criterion: Criterion) -> Result<MarTable, EvalError> {
    let cells = sheet.cells(criterion)?;
    let mut sums: BTreeMap<String, BTreeMap<String, (u64, u64)>> = BTreeMap::new();
    for ((annotator, _item, system), rank) in &cells {
        let slot = sums
            .entry(system.clone())
            .or_default()
            .entry(annotator.clone())
            .or_default();
        slot.0 += *rank as u64;
        slot.1 += 1;
    }
    let systems = sums
        .into_iter()
        .map(|(system, by_annotator)| {
            let per_annotator: BTreeMap<String, f64> = by_annotator
                .into_iter()
                .map(|(a, (sum, count))| (a, sum as f64 / count as f64))
                .collect();
            let average = per_annotator.values().sum::<f64>() / per_annotator.len() as f64;
            (system, MarEntry { per_annotator, average })
        })
        .collect();
    Ok(MarTable { criterion, systems })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMetric {
    #[default]
    Ordinal,
    Interval,
}

impl FromStr for AlphaMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ordinal" => Ok(Self::Ordinal),
            "interval" => Ok(Self::Interval),
            other => Err(format!("unknown alpha metric `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub metric: AlphaMetric,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// Krippendorff's alpha over one criterion. Units are (item, system) pairs,
/// coders are annotators and values are ranks.
///
/// Computed from the coincidence matrix: α = 1 − (n−1)·Σ o_ck δ²_ck / Σ n_c n_k δ²_ck.
/// Zero expected disagreement yields α = 1 with a diagnostic.
pub fn krippendorff_alpha(sheet: &RankingSheet, criterion: Criterion, metric: AlphaMetric) -> Result<AlphaResult, EvalError> {
    let cells = sheet.cells(criterion)?;
    let annotators: BTreeSet<&str> = cells.keys().map(|(a, _, _)| a.as_str()).collect();
    let items: BTreeSet<&str> = cells.keys().map(|(_, i, _)| i.as_str()).collect();
    if annotators.len() < 2 {
        return Err(EvalError::InsufficientData("at least two annotators are needed".into()));
    }
    if items.len() < 2 {
        return Err(EvalError::InsufficientData("at least two items are needed".into()));
    }
    let mut units: BTreeMap<(&str, &str), Vec<u32>> = BTreeMap::new();
    for ((_, item, system), rank) in &cells {
        units.entry((item.as_str(), system.as_str())).or_default().push(*rank);
    }
    let values: Vec<u32> = cells.values().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let index = |v: u32| values.binary_search(&v).expect("value is present");
    let k = values.len();
    let mut o = vec![vec![0.0f64; k]; k];
    for ranks in units.values() {
        let m = ranks.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m - 1) as f64;
        for (i, a) in ranks.iter().enumerate() {
            for (j, b) in ranks.iter().enumerate() {
                if i != j {
                    o[index(*a)][index(*b)] += w;
                }
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let delta2 = |c: usize, d: usize| -> f64 {
        match metric {
            AlphaMetric::Interval => {
                let diff = values[c] as f64 - values[d] as f64;
                diff * diff
            }
            AlphaMetric::Ordinal => {
                let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
                let between: f64 = n_c[lo..=hi].iter().sum::<f64>() - (n_c[lo] + n_c[hi]) / 2.0;
                between * between
            }
        }
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            let dd = delta2(c, d);
            observed += o[c][d] * dd;
            expected += n_c[c] * n_c[d] * dd;
        }
    }
    if expected == 0.0 {
        return Ok(AlphaResult {
            alpha: 1.0,
            metric,
            diagnostics: vec!["DegenerateData: zero expected disagreement; alpha set to 1 by convention".into()],
        });
    }
    Ok(AlphaResult {
        alpha: 1.0 - (n - 1.0) * observed / expected,
        metric,
        diagnostics: Vec::new(),
    })
}
