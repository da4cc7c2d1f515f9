//! Task and negative sampling.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::ChaCha8Rng;

use super::dataset::{KnowledgeGraphDataset, SplitName, Triplet};
use super::DataError;

/// One training task: a positive triplet and a corrupted-tail negative
/// sharing its head and relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskBatch {
    pub relation: usize,
    pub positive: Triplet,
    pub negative: Triplet,
}

/// Attempts before falling back to enumerating valid tails. Rejection and
/// enumeration are both uniform over the valid set, so the fallback only
/// changes speed on dense graphs, not the distribution family.
const REJECTION_ATTEMPTS: usize = 64;

/// Corrupts the tail uniformly over entities t' for which (h, r, t') is not
/// in the graph. The positive's own tail is such a member, so t' != t holds
/// automatically.
pub fn sample_negative(
    positive: &Triplet,
    dataset: &KnowledgeGraphDataset,
    rng: &mut ChaCha8Rng,
) -> Result<Triplet, DataError> {
    let n = dataset.n_entities();
    let candidate = |tail: usize| Triplet { head: positive.head, relation: positive.relation, tail };
    for _ in 0..REJECTION_ATTEMPTS {
        let cand = candidate(rng.random_range(0..n));
        if !dataset.contains(&cand) {
            return Ok(cand);
        }
    }
    let valid: Vec<Triplet> = (0..n).map(candidate).filter(|c| !dataset.contains(c)).collect();
    if valid.is_empty() {
        return Err(DataError::NoValidNegative {
            relation: dataset.relation_name(positive.relation).to_string(),
        });
    }
    Ok(valid[rng.random_range(0..valid.len())])
}

/// Draws a relation uniformly from the split, a positive uniformly from its
/// triplets, and a fresh negative.
pub fn sample_task(
    dataset: &KnowledgeGraphDataset,
    split: SplitName,
    rng: &mut ChaCha8Rng,
) -> Result<TaskBatch, DataError> {
    let relations: Vec<usize> = dataset.split(split).iter().copied().collect();
    if relations.is_empty() {
        return Err(DataError::EmptySplit(split));
    }
    let relation = relations[rng.random_range(0..relations.len())];
    let triplets = dataset.relation_triplets(relation);
    let positive = triplets[rng.random_range(0..triplets.len())];
    let negative = sample_negative(&positive, dataset, rng)?;
    Ok(TaskBatch { relation, positive, negative })
}
