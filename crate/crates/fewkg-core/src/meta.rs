//! Reptile meta-learning over relations-as-tasks.
//!
//! Training repeats: snapshot the parameters W, run B independent inner
//! adaptations of S optimizer steps each starting from the snapshot, then
//! move W a fraction of the way toward the mean of the adapted copies.
//! Validation runs the full few-shot protocol every epoch and the best
//! checkpoint by validation MRR is what training returns.
//!
//! Meta-test adaptation ([`meta_test_adapt`]) sees only k support triplets
//! of an unseen relation plus K triplet embeddings drawn from the CVAE
//! prior; the generated embeddings enter the hinge as extra positives and
//! stay constant across the S steps.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config::{InnerOptimizer, ModelConfig, Settings};
use crate::data::{
    sample_negative, sample_task, DataError, KnowledgeGraphDataset, SplitName, TaskBatch, Triplet,
};
use crate::diff::{adam_step, sgd_step, AdamState, DiffError, NodeId, ParameterSet, Tensor};
use crate::encoder::{self, EncodeError, Graph};
use crate::eval::{self, EvalError};
use crate::objective::{self, LossParts};
use crate::rng::{self, ChaCha8Rng};
use crate::tcvae::{self, GeneratedTriplet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetaError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("relation {relation} has {have} triplets, need more than {k}")]
    TooFewTriplets { relation: usize, have: usize, k: usize },
}

/// All trainable weights: encoder (with memories and word embeddings) plus
/// the CVAE. Both blocks register regardless of the ablation flags so that
/// toggling a flag never changes the parameter inventory for a given seed.
pub fn init_parameters(
    model: &ModelConfig,
    vocab_size: usize,
    rng: &mut ChaCha8Rng,
) -> ParameterSet {
    let mut params = ParameterSet::new();
    encoder::register_encoder_params(&mut params, model, vocab_size, rng);
    tcvae::register_tcvae_params(&mut params, model, rng);
    params
}

/// One inner adaptation run's result.
#[derive(Debug, Clone)]
pub struct InnerRun {
    pub params: ParameterSet,
    /// Mean loss parts over the S steps; zeros when S = 0.
    pub mean_parts: LossParts,
}

fn optimizer_step(
    params: &mut ParameterSet,
    grads: &ParameterSet,
    state: &mut AdamState,
    settings: &Settings,
) {
    match settings.train.inner_optimizer {
        InnerOptimizer::Adam => adam_step(params, grads, state, settings.train.inner_lr),
        InnerOptimizer::Sgd => sgd_step(params, grads, settings.train.inner_lr),
    }
}

/// S optimizer steps on one task, starting from a copy of `w` with fresh
/// optimizer state. The first step uses the task's own negative; later
/// steps resample the corrupted tail. Each step draws a fresh latent noise
/// vector when the CVAE is enabled.
pub fn inner_train(
    w: &ParameterSet,
    task: &TaskBatch,
    dataset: &KnowledgeGraphDataset,
    settings: &Settings,
    rng: &mut ChaCha8Rng,
) -> Result<InnerRun, MetaError> {
    let mut params = w.clone();
    let mut state = AdamState::new();
    let mut acc = LossParts { kgc: 0.0, rec: 0.0, kld: 0.0, reg: 0.0, total: 0.0 };
    let steps = settings.train.inner_steps;
    for step in 0..steps {
        let negative = if step == 0 {
            task.negative
        } else {
            sample_negative(&task.positive, dataset, rng)?
        };
        let eps = settings
            .model
            .use_tcvae
            .then(|| Tensor::vector(rng::normal_vec(rng, settings.model.latent_dim)));
        let (grads, parts) = {
            let mut g = Graph::new(&params, &settings.model, true);
            let (node, parts) = objective::training_loss(
                &mut g,
                dataset,
                &task.positive,
                negative.tail,
                &settings.loss,
                eps.as_ref(),
            )?;
            (g.parameter_grads(node), parts)
        };
        optimizer_step(&mut params, &grads, &mut state, settings);
        acc.kgc += parts.kgc;
        acc.rec += parts.rec;
        acc.kld += parts.kld;
        acc.reg += parts.reg;
        acc.total += parts.total;
    }
    if steps > 0 {
        let inv = 1.0 / steps as f64;
        acc = LossParts {
            kgc: acc.kgc * inv,
            rec: acc.rec * inv,
            kld: acc.kld * inv,
            reg: acc.reg * inv,
            total: acc.total * inv,
        };
    }
    Ok(InnerRun { params, mean_parts: acc })
}

/// W' = W + outer_lr * (mean(W_i) - W), elementwise.
pub fn reptile_update(
    w: &ParameterSet,
    inner_results: &[ParameterSet],
    outer_lr: f64,
) -> Result<ParameterSet, DiffError> {
    assert!(!inner_results.is_empty(), "reptile update needs at least one inner result");
    for wi in inner_results {
        for (name, t) in w.iter() {
            if !wi.contains(name) || wi.get(name).dims() != t.dims() {
                return Err(DiffError::ShapeMismatch {
                    name: name.to_string(),
                    left: alloc::format!("{:?}", t.dims()),
                    right: if wi.contains(name) {
                        alloc::format!("{:?}", wi.get(name).dims())
                    } else {
                        "missing".into()
                    },
                });
            }
        }
        if wi.len() != w.len() {
            return Err(DiffError::ShapeMismatch {
                name: "parameter count".into(),
                left: alloc::format!("{}", w.len()),
                right: alloc::format!("{}", wi.len()),
            });
        }
    }
    let weight = 1.0 / inner_results.len() as f64;
    let mut mean = w.zeros_like();
    for wi in inner_results {
        mean.axpy(weight, wi);
    }
    let mut out = w.clone();
    for (name, t) in out.iter_mut() {
        let m = mean.get(name);
        for (o, &mv) in t.data_mut().iter_mut().zip(m.data()) {
            *o += outer_lr * (mv - *o);
        }
    }
    Ok(out)
}

/// Log events emitted during meta-training, one JSON-friendly record each.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Iteration {
        epoch: usize,
        iteration: u64,
        kgc: f64,
        rec: f64,
        kld: f64,
        reg: f64,
        total: f64,
    },
    Validation { epoch: usize, mrr: f64, best_mrr: f64, best_epoch: usize },
}

/// Outcome of [`meta_train`]: the checkpoint with the best validation MRR.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterSet,
    pub best_epoch: usize,
    pub best_val_mrr: f64,
}

const TAG_INIT: u64 = 0x494E_4954; // "INIT"
const TAG_TASKS: u64 = 0x5441_534B; // "TASK"
const TAG_INNER: u64 = 0x494E_4E52; // "INNR"
const TAG_EVAL: u64 = 0x4556_414C; // "EVAL"

/// Full Reptile loop with per-epoch validation and best-MRR checkpointing.
/// All randomness derives from `seed`; inner runs get decorrelated
/// substreams keyed by (iteration, slot) so their results do not depend on
/// execution order.
pub fn meta_train(
    dataset: &KnowledgeGraphDataset,
    settings: &Settings,
    seed: u64,
    sink: &mut dyn FnMut(&LogEvent),
) -> Result<TrainOutcome, MetaError> {
    let mut w = init_parameters(
        &settings.model,
        dataset.vocab().size(),
        &mut rng::substream(seed, TAG_INIT),
    );
    let mut task_rng = rng::substream(seed, TAG_TASKS);
    let mut best: Option<(f64, usize, ParameterSet)> = None;
    let mut iteration = 0u64;
    for epoch in 1..=settings.train.max_epochs {
        for _ in 0..settings.train.iterations_per_epoch {
            iteration += 1;
            let b_tasks = settings.train.batch_tasks;
            let mut tasks = Vec::with_capacity(b_tasks);
            for _ in 0..b_tasks {
                tasks.push(sample_task(dataset, SplitName::Train, &mut task_rng)?);
            }
            let mut inner_results = Vec::with_capacity(b_tasks);
            let mut acc = LossParts { kgc: 0.0, rec: 0.0, kld: 0.0, reg: 0.0, total: 0.0 };
            for (slot, task) in tasks.iter().enumerate() {
                let mut run_rng =
                    rng::substream(seed, TAG_INNER ^ (iteration << 8) ^ slot as u64);
                let run = inner_train(&w, task, dataset, settings, &mut run_rng)?;
                acc.kgc += run.mean_parts.kgc;
                acc.rec += run.mean_parts.rec;
                acc.kld += run.mean_parts.kld;
                acc.reg += run.mean_parts.reg;
                acc.total += run.mean_parts.total;
                inner_results.push(run.params);
            }
            w = reptile_update(&w, &inner_results, settings.train.outer_lr)?;
            let inv = 1.0 / b_tasks as f64;
            sink(&LogEvent::Iteration {
                epoch,
                iteration,
                kgc: acc.kgc * inv,
                rec: acc.rec * inv,
                kld: acc.kld * inv,
                reg: acc.reg * inv,
                total: acc.total * inv,
            });
        }
        // One fixed validation stream for the whole run: every epoch sees
        // the same supports, adaptation noise, and generator draws, so the
        // best-epoch argmax compares parameters rather than resampled tasks.
        let val_seed = rng::subseed(seed, TAG_EVAL);
        let metrics = eval::meta_evaluate(&w, dataset, SplitName::Val, settings, val_seed)?;
        let improved = best.as_ref().map_or(true, |(m, _, _)| metrics.mrr > *m);
        if improved {
            best = Some((metrics.mrr, epoch, w.clone()));
        }
        let (best_mrr, best_epoch, _) = best.as_ref().expect("set above");
        sink(&LogEvent::Validation {
            epoch,
            mrr: metrics.mrr,
            best_mrr: *best_mrr,
            best_epoch: *best_epoch,
        });
    }
    match best {
        Some((best_val_mrr, best_epoch, params)) => {
            Ok(TrainOutcome { params, best_epoch, best_val_mrr })
        }
        // max_epochs = 0: nothing trained, return the initialization.
        None => Ok(TrainOutcome { params: w, best_epoch: 0, best_val_mrr: f64::NAN }),
    }
}

/// Sum of hinge losses for one adaptation step: one term per support (with
/// a freshly resampled corrupted tail) and one per generated triplet (whose
/// corrupted tail is a freshly encoded uniform random entity).
fn adapt_step_loss(
    g: &mut Graph,
    dataset: &KnowledgeGraphDataset,
    relation: usize,
    supports: &[Triplet],
    generated: &[GeneratedTriplet],
    settings: &Settings,
    rng: &mut ChaCha8Rng,
) -> Result<NodeId, MetaError> {
    let use_trait = settings.model.use_trait;
    let margin = settings.loss.margin;
    let o_r = encoder::encode_relation(g, dataset.relation_description(relation))?;
    let (trait_head, trait_tail) = if use_trait {
        (
            Some(encoder::compute_trait(g, o_r, "mem.rel_head", "mem.ent_head")),
            Some(encoder::compute_trait(g, o_r, "mem.rel_tail", "mem.ent_tail")),
        )
    } else {
        (None, None)
    };
    let mut total: Option<NodeId> = None;
    let push = |g: &mut Graph, total: &mut Option<NodeId>, term: NodeId| {
        *total = Some(match *total {
            Some(t) => crate::diff::ops::add(&mut g.tape, t, term),
            None => term,
        });
    };
    for support in supports {
        let e_h =
            encoder::encode_entity(g, dataset.entity_description(support.head), trait_head, use_trait)?;
        let e_t =
            encoder::encode_entity(g, dataset.entity_description(support.tail), trait_tail, use_trait)?;
        let negative = sample_negative(support, dataset, rng)?;
        let e_n = encoder::encode_entity(
            g,
            dataset.entity_description(negative.tail),
            trait_tail,
            use_trait,
        )?;
        let c_pos = objective::score_nodes(g, e_h, o_r, e_t);
        let c_neg = objective::score_nodes(g, e_h, o_r, e_n);
        let hinge = objective::kgc_loss_nodes(g, c_pos, c_neg, margin);
        push(g, &mut total, hinge);
    }
    for gen in generated {
        let g_h = g.tape.leaf(gen.head.clone());
        let g_r = g.tape.leaf(gen.relation.clone());
        let g_t = g.tape.leaf(gen.tail.clone());
        let corrupt = rng.random_range(0..dataset.n_entities());
        let e_n = encoder::encode_entity(
            g,
            dataset.entity_description(corrupt),
            trait_tail,
            use_trait,
        )?;
        let c_pos = objective::score_nodes(g, g_h, g_r, g_t);
        let c_neg = objective::score_nodes(g, g_h, g_r, e_n);
        let hinge = objective::kgc_loss_nodes(g, c_pos, c_neg, margin);
        push(g, &mut total, hinge);
    }
    Ok(total.expect("at least one support or generated triplet"))
}

/// Few-shot adaptation for one unseen relation: sample k supports, draw K
/// triplet embeddings from the prior once, then run S optimizer steps on
/// the summed hinges. Returns the adapted copy and the held-out queries;
/// `w` itself is never touched.
pub fn meta_test_adapt(
    w: &ParameterSet,
    relation: usize,
    dataset: &KnowledgeGraphDataset,
    k: usize,
    settings: &Settings,
    rng: &mut ChaCha8Rng,
) -> Result<(ParameterSet, Vec<Triplet>), MetaError> {
    let pool = dataset.relation_triplets(relation);
    if pool.len() <= k {
        return Err(MetaError::TooFewTriplets { relation, have: pool.len(), k });
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);
    let mut support_idx = order[..k].to_vec();
    support_idx.sort_unstable();
    let supports: Vec<Triplet> = support_idx.iter().map(|&i| pool[i]).collect();
    let queries: Vec<Triplet> = (0..pool.len())
        .filter(|i| !support_idx.contains(i))
        .map(|i| pool[i])
        .collect();

    let k_gen = settings.effective_n_generated();
    let generated = if k_gen > 0 {
        let o_r = {
            let mut g = Graph::new(w, &settings.model, false);
            let node = encoder::encode_relation(&mut g, dataset.relation_description(relation))?;
            g.value(node).clone()
        };
        tcvae::augment(w, &settings.model, &o_r, k_gen, rng)
    } else {
        Vec::new()
    };

    let mut params = w.clone();
    if supports.is_empty() && generated.is_empty() {
        return Ok((params, queries));
    }
    let mut state = AdamState::new();
    for _ in 0..settings.train.inner_steps {
        let grads = {
            let mut g = Graph::new(&params, &settings.model, true);
            let loss =
                adapt_step_loss(&mut g, dataset, relation, &supports, &generated, settings, rng)?;
            g.parameter_grads(loss)
        };
        optimizer_step(&mut params, &grads, &mut state, settings);
    }
    Ok((params, queries))
}
