//! Conjunctive predicate clauses.
//!
//! A claim is decomposed into ground predicates such as
//! `Location(Howard Hospital, Washington D.C.) ::: Verify ...` and the claim
//! holds only when every predicate holds. This module owns the line grammar,
//! the printer, and a three-valued conjunction used to evaluate a clause
//! against per-predicate judgments.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separator between a predicate head and its free-text description.
pub const DESCRIPTION_SEPARATOR: &str = ":::";
/// Connective between predicate heads in a rendered clause.
pub const CONJUNCTION: &str = "&&";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FolError {
    #[error("malformed predicate `{line}`: {reason}")]
    MalformedPredicate { line: String, reason: String },
    #[error("no predicate could be parsed from the block")]
    EmptyClause { diagnostics: Vec<String> },
    #[error("no truth assignment for predicate `{0}`")]
    MissingAssignment(String),
}

fn malformed(line: &str, reason: &str) -> FolError {
    FolError::MalformedPredicate {
        line: line.to_string(),
        reason: reason.to_string(),
    }
}

/// Collapses runs of whitespace into single spaces and trims the ends.
pub fn squash_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Identity of a predicate: its name and arguments, description excluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredicateId {
    pub name: String,
    pub args: Vec<String>,
}

impl PredicateId {
    pub fn head(&self) -> String {
        format!("{}({})", self.name, self.args.join(", "))
    }
}

impl fmt::Display for PredicateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.head())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<String>,
    #[serde(default)]
    pub description: String,
}

impl Predicate {
    /// Builds a predicate, normalizing whitespace and enforcing the grammar's
    /// invariants on name and arguments.
    pub fn new<S: AsRef<str>>(
        name: &str,
        args: &[S],
        description: &str,
    ) -> Result<Self, FolError> {
        let name = squash_whitespace(name);
        let shown = || format!("{}({})", name, args.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(", "));
        if name.is_empty() {
            return Err(malformed(&shown(), "empty predicate name"));
        }
        if name.contains('(') || name.contains(')') || name.contains(CONJUNCTION) {
            return Err(malformed(&shown(), "predicate name contains `(`, `)` or `&&`"));
        }
        if args.is_empty() {
            return Err(malformed(&shown(), "empty argument list"));
        }
        let args: Vec<String> = args.iter().map(|a| squash_whitespace(a.as_ref())).collect();
        if args.iter().any(String::is_empty) {
            return Err(malformed(&shown(), "empty argument"));
        }
        Ok(Self {
            name,
            args,
            description: description.trim().to_string(),
        })
    }

    pub fn id(&self) -> PredicateId {
        PredicateId {
            name: self.name.clone(),
            args: self.args.clone(),
        }
    }

    /// `Name(arg1, arg2)` without the description.
    pub fn head(&self) -> String {
        format!("{}({})", self.name, self.args.join(", "))
    }

    /// Full line form: the head, followed by ` ::: description` when one is set.
    pub fn render(&self) -> String {
        if self.description.is_empty() {
            self.head()
        } else {
            format!("{} {} {}", self.head(), DESCRIPTION_SEPARATOR, self.description)
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Locates a predicate head at the start of `text`.
///
/// Returns the name, the raw argument strings split on commas at depth 1, and
/// the byte offset just past the closing parenthesis.
pub(crate) fn scan_head(text: &str) -> Result<(String, Vec<String>, usize), String> {
    let open = text.find('(').ok_or("no opening parenthesis")?;
    let name = text[..open].trim();
    if name.is_empty() {
        return Err("empty predicate name".into());
    }
    if name.contains(')') || name.contains(CONJUNCTION) {
        return Err("predicate name contains `)` or `&&`".into());
    }
    let mut depth = 0usize;
    let mut args = Vec::new();
    let mut start = open + 1;
    for (i, ch) in text.char_indices().skip_while(|(i, _)| *i < open) {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    args.push(text[start..i].to_string());
                    return Ok((name.to_string(), args, i + 1));
                }
            }
            ',' if depth == 1 => {
                args.push(text[start..i].to_string());
                start = i + 1;
            }
            _ => {}
        }
    }
    Err("unbalanced parentheses".into())
}

/// Parses one predicate line: `Name(arg, ...) [::: description]`.
///
/// A bare head may carry a single trailing period, as the decomposition
/// examples sometimes end a line with one.
pub fn parse_predicate(line: &str) -> Result<Predicate, FolError> {
    let line = line.trim();
    let (head, description) = match line.find(DESCRIPTION_SEPARATOR) {
        Some(pos) => (
            &line[..pos],
            line[pos + DESCRIPTION_SEPARATOR.len()..].trim(),
        ),
        None => (line, ""),
    };
    let (name, args, end) = scan_head(head).map_err(|reason| malformed(line, &reason))?;
    let rest = head[end..].trim();
    if !(rest.is_empty() || (rest == "." && description.is_empty())) {
        return Err(malformed(line, "unexpected text after the closing parenthesis"));
    }
    if args.len() == 1 && args[0].trim().is_empty() {
        return Err(malformed(line, "empty argument list"));
    }
    Predicate::new(&name, &args, description).map_err(|_| {
        malformed(line, "empty argument")
    })
}

/// Text-level canonical form of a predicate line, computed without the parser.
///
/// Whitespace runs collapse, every comma in the head is followed by exactly
/// one space, the description separator is spaced as ` ::: `, and a lone
/// trailing period after a bare head is dropped.
pub fn normalize_line(line: &str) -> String {
    let line = line.trim();
    let (head, description) = match line.find(DESCRIPTION_SEPARATOR) {
        Some(pos) => (&line[..pos], Some(&line[pos + DESCRIPTION_SEPARATOR.len()..])),
        None => (line, None),
    };
    let mut head = match head.find('(') {
        Some(open) => {
            let args = head[open + 1..]
                .split(',')
                .map(str::trim)
                .collect::<Vec<_>>()
                .join(", ");
            format!("{}({}", squash_whitespace(&head[..open]), squash_whitespace(&args))
                .replace("( ", "(")
                .replace(" )", ")")
        }
        None => squash_whitespace(head),
    };
    match description.map(squash_whitespace) {
        Some(d) if !d.is_empty() => format!("{head} {DESCRIPTION_SEPARATOR} {d}"),
        _ => {
            if head.ends_with(").") {
                head.pop();
            }
            head
        }
    }
}

/// An ordered conjunction of distinct predicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateClause {
    predicates: Vec<Predicate>,
}

impl PredicateClause {
    /// Builds a clause, dropping repeated identities (first occurrence wins).
    /// Returns the clause and one diagnostic per dropped duplicate.
    pub fn new(predicates: Vec<Predicate>) -> Result<(Self, Vec<String>), FolError> {
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(predicates.len());
        let mut diagnostics = Vec::new();
        for p in predicates {
            if seen.insert(p.id()) {
                kept.push(p);
            } else {
                diagnostics.push(format!("duplicate predicate `{}` dropped", p.head()));
            }
        }
        if kept.is_empty() {
            return Err(FolError::EmptyClause { diagnostics });
        }
        Ok((Self { predicates: kept }, diagnostics))
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = PredicateId> + '_ {
        self.predicates.iter().map(Predicate::id)
    }
}

/// Result of parsing a multi-line block into a clause.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedClause {
    pub clause: PredicateClause,
    pub diagnostics: Vec<String>,
}

/// Splits `text` on `&&` occurring outside parentheses.
fn split_conjunction(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'&' if depth == 0 && bytes.get(i + 1) == Some(&b'&') => {
                parts.push(&text[start..i]);
                start = i + 2;
                i += 1;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(&text[start..]);
    parts
}

/// Parses every predicate found in `block`, one per line or several per line
/// when joined with `&&`. Lines that do not parse are skipped and reported.
pub fn parse_clause(block: &str) -> Result<ParsedClause, FolError> {
    let mut predicates = Vec::new();
    let mut diagnostics = Vec::new();
    for (lineno, raw) in block.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (head, description) = match line.find(DESCRIPTION_SEPARATOR) {
            Some(pos) => (&line[..pos], &line[pos..]),
            None => (line, ""),
        };
        let segments = split_conjunction(head);
        let last = segments.len() - 1;
        for (i, segment) in segments.into_iter().enumerate() {
            let candidate = if i == last {
                format!("{segment}{description}")
            } else {
                segment.to_string()
            };
            match parse_predicate(&candidate) {
                Ok(p) => predicates.push(p),
                Err(e) => diagnostics.push(format!("line {}: {e}", lineno + 1)),
            }
        }
    }
    match PredicateClause::new(predicates) {
        Ok((clause, dups)) => {
            diagnostics.extend(dups);
            Ok(ParsedClause { clause, diagnostics })
        }
        Err(FolError::EmptyClause { diagnostics: d }) => {
            diagnostics.extend(d);
            Err(FolError::EmptyClause { diagnostics })
        }
        Err(e) => Err(e),
    }
}

/// Predicate heads joined by ` && `.
pub fn render_clause(clause: &PredicateClause) -> String {
    clause
        .predicates
        .iter()
        .map(Predicate::head)
        .collect::<Vec<_>>()
        .join(&format!(" {CONJUNCTION} "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TruthValue {
    True,
    False,
    Unknown,
}

impl TruthValue {
    pub fn from_bool(value: bool) -> Self {
        if value {
            Self::True
        } else {
            Self::False
        }
    }

    /// Three-valued conjunction with `False` dominant.
    pub fn and(self, other: Self) -> Self {
        match (self, other) {
            (Self::False, _) | (_, Self::False) => Self::False,
            (Self::Unknown, _) | (_, Self::Unknown) => Self::Unknown,
            _ => Self::True,
        }
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::True => "True",
            Self::False => "False",
            Self::Unknown => "Unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub value: TruthValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Judgment {
    pub fn new(value: TruthValue, reason: Option<String>) -> Self {
        Self { value, reason }
    }
}

/// Per-predicate judgments, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruthAssignment {
    entries: IndexMap<PredicateId, Judgment>,
}

impl TruthAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every predicate of `clause` set to `Unknown`.
    pub fn unknown_for(clause: &PredicateClause) -> Self {
        let mut out = Self::new();
        for id in clause.ids() {
            out.set(id, Judgment::new(TruthValue::Unknown, None));
        }
        out
    }

    pub fn set(&mut self, id: PredicateId, judgment: Judgment) {
        self.entries.insert(id, judgment);
    }

    pub fn get(&self, id: &PredicateId) -> Option<&Judgment> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PredicateId, &Judgment)> {
        self.entries.iter()
    }
}

#[derive(Serialize, Deserialize)]
struct AssignmentEntry {
    predicate: PredicateId,
    #[serde(flatten)]
    judgment: Judgment,
}

impl Serialize for TruthAssignment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<AssignmentEntry> = self
            .entries
            .iter()
            .map(|(predicate, judgment)| AssignmentEntry {
                predicate: predicate.clone(),
                judgment: judgment.clone(),
            })
            .collect();
        entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TruthAssignment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let entries = Vec::<AssignmentEntry>::deserialize(deserializer)?;
        Ok(Self {
            entries: entries
                .into_iter()
                .map(|e| (e.predicate, e.judgment))
                .collect(),
        })
    }
}

/// Three-valued conjunction over the clause: `False` if any predicate is
/// false, else `Unknown` if any is unknown, else `True`.
pub fn evaluate_clause(
    clause: &PredicateClause,
    assignment: &TruthAssignment,
) -> Result<TruthValue, FolError> {
    clause.ids().try_fold(TruthValue::True, |acc, id| {
        let judgment = assignment
            .get(&id)
            .ok_or_else(|| FolError::MissingAssignment(id.head()))?;
        Ok(acc.and(judgment.value))
    })
}
