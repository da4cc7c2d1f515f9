//! Knowledge-graph datasets with textual descriptions.
//!
//! A dataset couples three things: entity and relation descriptions (token
//! id sequences over a shared vocabulary), a duplicate-free triplet set, and
//! a partition of the relations into train/val/test splits. Everything here
//! works on in-memory strings; reading files and reporting missing paths is
//! the companion crate's job.
//!
//! Submodules: [`vocab`] builds vocabularies and tokenizes, [`dataset`]
//! holds the validated graph, [`parse`] decodes the TSV/JSON formats,
//! [`sample`] draws tasks and negatives, [`synth`] fabricates desk-scale
//! datasets whose correct tails are recoverable from text alone.

mod dataset;
mod parse;
mod sample;
mod synth;
mod vocab;

pub use dataset::{build_dataset, KnowledgeGraphDataset, RawSplits, SplitName, Triplet};
pub use parse::{parse_pairs_tsv, parse_splits_json, parse_triplets_tsv};
pub use sample::{sample_negative, sample_task, TaskBatch};
pub use synth::{generate_synthetic_dataset, SyntheticFiles, SyntheticSpec};
pub use vocab::{tokenize, Description, Vocabulary, OOV_ID, PAD_ID};

use alloc::string::String;

/// Validation and sampling failures. Carries the offending names so CLI
/// surfaces can point at the broken row.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataError {
    #[error("{kind} id {id:?} is not declared")]
    UnknownId { kind: &'static str, id: String },
    #[error("{kind} {id:?} has an empty description")]
    EmptyDescription { kind: &'static str, id: String },
    #[error("relation {relation:?} appears in more than one split")]
    SplitOverlap { relation: String },
    #[error("relation {relation:?} is missing from splits.json")]
    SplitUncovered { relation: String },
    #[error("relation {relation:?} has no triplets")]
    NoTriplets { relation: String },
    #[error("duplicate triplet ({head} {relation} {tail})")]
    DuplicateTriplet { head: String, relation: String, tail: String },
    #[error("{file} line {line}: {message}")]
    Malformed { file: &'static str, line: usize, message: String },
    #[error("no valid negative tail exists for relation {relation:?}")]
    NoValidNegative { relation: String },
    #[error("split {0} has no relations")]
    EmptySplit(SplitName),
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
}
