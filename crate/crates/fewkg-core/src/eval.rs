//! Tail-prediction ranking and the MRR / Hits@P metric suite.
//!
//! A query (h, r, ?) is scored against every entity (optionally minus other
//! known-true tails) with the adapted parameters; lower translation cost is
//! better. Ties resolve pessimistically by default so a constant scorer
//! cannot beat random ranking. [`meta_evaluate`] runs the full few-shot
//! protocol: adapt on k supports per relation, rank the held-out queries,
//! aggregate.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EvalConfig, ModelConfig, Settings, TieBreak};
use crate::data::{KnowledgeGraphDataset, SplitName, Triplet};
use crate::diff::ParameterSet;
use crate::encoder::{self, EncodeError, Graph};
use crate::meta::{self, MetaError};
use crate::objective;
use crate::rng;

/// Rank of one query under one adapted model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankResult {
    pub relation: usize,
    pub query: Triplet,
    /// 1-based; 1 <= rank <= candidate_count.
    pub rank: usize,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no ranks to aggregate")]
    EmptyInput,
    /// Candidate scoring produced NaN or infinity; ranking such scores
    /// would silently report nonsense (a NaN target compares false against
    /// everything and would rank first).
    #[error("non-finite score {score} for candidate {entity} of relation {relation}")]
    NonFiniteScore { relation: usize, entity: usize, score: f64 },
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Aggregated ranking metrics. Key names are part of the report format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mrr: f64,
    /// P -> fraction of queries with rank <= P.
    pub hits: BTreeMap<usize, f64>,
    /// Relation name -> breakdown.
    pub per_relation: BTreeMap<String, RelationBreakdown>,
    /// Seeds that produced this report; one entry for a single run.
    pub seeds: Vec<u64>,
    pub n_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationBreakdown {
    pub mrr: f64,
    pub n_queries: usize,
}

/// Rank of `scores[correct]` within `scores`, lower score ranking first.
/// Scores must be finite; `rank_tail` guarantees that.
pub fn rank_from_scores(scores: &[f64], correct: usize, tie_break: TieBreak) -> usize {
    let target = scores[correct];
    let mut smaller = 0usize;
    let mut tied = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s < target {
            smaller += 1;
        } else if s == target && i != correct {
            tied += 1;
        }
    }
    match tie_break {
        TieBreak::Pessimistic => 1 + smaller + tied,
        TieBreak::Optimistic => 1 + smaller,
    }
}

/// Scores every candidate tail for (h, r, ?) and ranks the true tail.
/// Candidates are all entities; with `filtered` on, other tails known true
/// for (h, r) are dropped first.
pub fn rank_tail(
    params: &ParameterSet,
    query: &Triplet,
    dataset: &KnowledgeGraphDataset,
    model: &ModelConfig,
    eval: &EvalConfig,
) -> Result<RankResult, EvalError> {
    let use_trait = model.use_trait;
    let mut g = Graph::new(params, model, false);
    let o_r = encoder::encode_relation(&mut g, dataset.relation_description(query.relation))?;
    let (trait_head, trait_tail) = if use_trait {
        (
            Some(encoder::compute_trait(&mut g, o_r, "mem.rel_head", "mem.ent_head")),
            Some(encoder::compute_trait(&mut g, o_r, "mem.rel_tail", "mem.ent_tail")),
        )
    } else {
        (None, None)
    };
    let e_h = encoder::encode_entity(
        &mut g,
        dataset.entity_description(query.head),
        trait_head,
        use_trait,
    )?;
    let head_v = g.value(e_h).clone();
    let rel_v = g.value(o_r).clone();

    let mut scores = Vec::with_capacity(dataset.n_entities());
    let mut correct = usize::MAX;
    for entity in 0..dataset.n_entities() {
        if eval.filtered && entity != query.tail {
            let known = Triplet { head: query.head, relation: query.relation, tail: entity };
            if dataset.contains(&known) {
                continue;
            }
        }
        let e_t = encoder::encode_entity(
            &mut g,
            dataset.entity_description(entity),
            trait_tail,
            use_trait,
        )?;
        if entity == query.tail {
            correct = scores.len();
        }
        let score = objective::score_values(&head_v, &rel_v, g.value(e_t));
        if !score.is_finite() {
            return Err(EvalError::NonFiniteScore { relation: query.relation, entity, score });
        }
        scores.push(score);
    }
    let rank = rank_from_scores(&scores, correct, eval.tie_break);
    Ok(RankResult {
        relation: query.relation,
        query: *query,
        rank,
        candidate_count: scores.len(),
    })
}

/// MRR and Hits@P over a batch of ranks, with a per-relation breakdown.
/// `seeds` is left empty for the caller to fill.
pub fn compute_metrics(
    ranks: &[RankResult],
    p_values: &[usize],
    dataset: &KnowledgeGraphDataset,
) -> Result<MetricsReport, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / n;
    let mut hits = BTreeMap::new();
    for &p in p_values {
        let frac = ranks.iter().filter(|r| r.rank <= p).count() as f64 / n;
        hits.insert(p, frac);
    }
    let mut per_relation: BTreeMap<String, RelationBreakdown> = BTreeMap::new();
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for r in ranks {
        grouped.entry(r.relation).or_default().push(r.rank);
    }
    for (relation, rel_ranks) in grouped {
        let rel_mrr =
            rel_ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / rel_ranks.len() as f64;
        per_relation.insert(
            dataset.relation_name(relation).to_string(),
            RelationBreakdown { mrr: rel_mrr, n_queries: rel_ranks.len() },
        );
    }
    if let Some(&h1) = hits.get(&1) {
        debug_assert!(mrr >= h1 - 1e-12, "mrr {mrr} below hits@1 {h1}");
    }
    Ok(MetricsReport { mrr, hits, per_relation, seeds: vec![], n_queries: ranks.len() })
}

const TAG_ADAPT: u64 = 0x4144_4150_5400; // "ADAPT"

/// Full few-shot evaluation of a split: per relation, adapt a copy of the
/// parameters on k supports (plus generated triplets) and rank every
/// held-out query. The input parameters are never modified.
pub fn meta_evaluate(
    params: &ParameterSet,
    dataset: &KnowledgeGraphDataset,
    split: SplitName,
    settings: &Settings,
    seed: u64,
) -> Result<MetricsReport, MetaError> {
    let mut ranks = Vec::new();
    for &relation in dataset.split(split) {
        let mut stream = rng::substream(seed, TAG_ADAPT ^ relation as u64);
        let (adapted, queries) = meta::meta_test_adapt(
            params,
            relation,
            dataset,
            settings.eval.k_shot,
            settings,
            &mut stream,
        )?;
        for query in &queries {
            ranks.push(rank_tail(&adapted, query, dataset, &settings.model, &settings.eval)?);
        }
    }
    let mut report = compute_metrics(&ranks, &settings.eval.hits_at, dataset)?;
    report.seeds = vec![seed];
    Ok(report)
}
