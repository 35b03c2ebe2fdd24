//! Claim verification with logic-guided decomposition and search-grounded
//! reasoning over a text-completion model.

pub mod digest;
pub mod eval;
pub mod fol;
pub mod gateway;
pub mod grounding;
pub mod label;
pub mod pipeline;
pub mod prompt;
pub mod transport;

pub use fol::{Predicate, PredicateClause, TruthAssignment, TruthValue};
pub use label::{GoldLabel, Label, Strategy};
