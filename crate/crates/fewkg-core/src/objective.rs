//! Translation score, negative-sampled hinge loss, and the combined
//! training objective.
//!
//! The score is plain L1 translation, C = sum_j |e_h + e_r - e_t|, so lower
//! is better and an exact translation scores 0. Training minimizes a margin
//! hinge between a true triplet and a tail-corrupted one, plus the three
//! generator terms when the TCVAE is enabled. The `kld_sign` switch picks
//! between the objective written with a subtracted KL term and the ELBO
//! reading that adds it; both are exposed because they disagree about which
//! direction the KL should move.


use crate::config::{KldSign, LossWeights};
use crate::data::{KnowledgeGraphDataset, Triplet};
use crate::diff::{ops, NodeId, Tensor};
use crate::encoder::{self, EncodeError, Graph, TripletEmbeddings, TripletNodes};
use crate::tcvae::{self, GeneratedTriplet};

/// C = sum_j |h[j] + r[j] - t[j]| over tape nodes.
pub fn score_nodes(g: &mut Graph, head: NodeId, relation: NodeId, tail: NodeId) -> NodeId {
    let translated = ops::add(&mut g.tape, head, relation);
    let residual = ops::sub(&mut g.tape, translated, tail);
    let magnitudes = ops::abs(&mut g.tape, residual);
    ops::sum(&mut g.tape, magnitudes)
}

/// C for detached vectors.
pub fn score_values(head: &Tensor, relation: &Tensor, tail: &Tensor) -> f64 {
    assert_eq!(head.len(), relation.len());
    assert_eq!(head.len(), tail.len());
    head.data()
        .iter()
        .zip(relation.data())
        .zip(tail.data())
        .map(|((h, r), t)| (h + r - t).abs())
        .sum()
}

/// Scores an encoded triplet.
pub fn score_triplet(e: &TripletEmbeddings) -> f64 {
    score_values(&e.head, &e.relation, &e.tail)
}

/// Scores a generated triplet.
pub fn score_generated(e: &GeneratedTriplet) -> f64 {
    score_values(&e.head, &e.relation, &e.tail)
}

/// Hinge max(0, gamma + c_pos - c_neg).
pub fn kgc_loss(c_pos: f64, c_neg: f64, margin: f64) -> f64 {
    (margin + c_pos - c_neg).max(0.0)
}

/// Hinge over scalar nodes.
pub fn kgc_loss_nodes(g: &mut Graph, c_pos: NodeId, c_neg: NodeId, margin: f64) -> NodeId {
    let gap = ops::sub(&mut g.tape, c_pos, c_neg);
    let shifted = ops::add_const(&mut g.tape, gap, margin);
    ops::relu(&mut g.tape, shifted)
}

fn kld_coefficient(w: &LossWeights) -> f64 {
    match w.kld_sign {
        KldSign::Paper => -w.lambda_kld,
        KldSign::Elbo => w.lambda_kld,
    }
}

/// L = L_KGC - L_rec -/+ lambda1 * L_kld - lambda2 * L_reg.
pub fn total_loss(l_kgc: f64, l_rec: f64, l_kld: f64, l_reg: f64, w: &LossWeights) -> f64 {
    l_kgc - l_rec + kld_coefficient(w) * l_kld - w.lambda_reg * l_reg
}

/// Node-space combination with the same signs as [`total_loss`].
pub fn total_loss_nodes(
    g: &mut Graph,
    l_kgc: NodeId,
    l_rec: NodeId,
    l_kld: NodeId,
    l_reg: NodeId,
    w: &LossWeights,
) -> NodeId {
    let rec = ops::scale(&mut g.tape, l_rec, -1.0);
    let kld = ops::scale(&mut g.tape, l_kld, kld_coefficient(w));
    let reg = ops::scale(&mut g.tape, l_reg, -w.lambda_reg);
    let a = ops::add(&mut g.tape, l_kgc, rec);
    let b = ops::add(&mut g.tape, a, kld);
    ops::add(&mut g.tape, b, reg)
}

/// Scalar values of each term for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub kgc: f64,
    pub rec: f64,
    pub kld: f64,
    pub reg: f64,
    pub total: f64,
}

/// Encodes a positive triplet plus one corrupted tail. The corrupted tail
/// is guided by the same tail-side trait as the true tail, so the two
/// scores differ only through the entities themselves.
pub fn encode_task(
    g: &mut Graph,
    dataset: &KnowledgeGraphDataset,
    positive: &Triplet,
    negative_tail: usize,
) -> Result<(TripletNodes, NodeId), EncodeError> {
    let use_trait = g.config.use_trait;
    let d_h = dataset.entity_description(positive.head);
    let d_r = dataset.relation_description(positive.relation);
    let d_t = dataset.entity_description(positive.tail);
    let o_r = encoder::encode_relation(g, d_r)?;
    let (trait_head, trait_tail) = if use_trait {
        (
            Some(encoder::compute_trait(g, o_r, "mem.rel_head", "mem.ent_head")),
            Some(encoder::compute_trait(g, o_r, "mem.rel_tail", "mem.ent_tail")),
        )
    } else {
        (None, None)
    };
    let head = encoder::encode_entity(g, d_h, trait_head, use_trait)?;
    let tail = encoder::encode_entity(g, d_t, trait_tail, use_trait)?;
    let corrupted = encoder::encode_entity(
        g,
        dataset.entity_description(negative_tail),
        trait_tail,
        use_trait,
    )?;
    Ok((TripletNodes { head, relation: o_r, tail }, corrupted))
}

/// Builds the full per-step loss: hinge over (positive, corrupted tail),
/// plus reconstruction, KL, and prior-regularizer terms when `eps` carries
/// a frozen latent draw. `eps = None` is the generator-off path, where the
/// loss is the hinge alone.
pub fn training_loss(
    g: &mut Graph,
    dataset: &KnowledgeGraphDataset,
    positive: &Triplet,
    negative_tail: usize,
    weights: &LossWeights,
    eps: Option<&Tensor>,
) -> Result<(NodeId, LossParts), EncodeError> {
    let (pos, corrupted) = encode_task(g, dataset, positive, negative_tail)?;
    let c_pos = score_nodes(g, pos.head, pos.relation, pos.tail);
    let c_neg = score_nodes(g, pos.head, pos.relation, corrupted);
    let l_kgc = kgc_loss_nodes(g, c_pos, c_neg, weights.margin);

    let Some(eps) = eps else {
        let parts = LossParts {
            kgc: g.value(l_kgc).item(),
            rec: 0.0,
            kld: 0.0,
            reg: 0.0,
            total: g.value(l_kgc).item(),
        };
        return Ok((l_kgc, parts));
    };

    let q = tcvae::recognize(g, &pos);
    let p = tcvae::prior(g, pos.relation);
    let z = tcvae::reparameterize(g, &q, eps);
    let generated = tcvae::generate(g, z, pos.relation);
    let l_rec = tcvae::reconstruction_loss(g, &pos, generated);
    let l_kld = tcvae::kl_divergence(g, &q, &p);
    let l_reg = tcvae::prior_regularizer(g, &p);
    let total = total_loss_nodes(g, l_kgc, l_rec, l_kld, l_reg, weights);
    let parts = LossParts {
        kgc: g.value(l_kgc).item(),
        rec: g.value(l_rec).item(),
        kld: g.value(l_kld).item(),
        reg: g.value(l_reg).item(),
        total: g.value(total).item(),
    };
    Ok((total, parts))
}
