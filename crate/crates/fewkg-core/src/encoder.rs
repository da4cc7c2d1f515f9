//! The description encoder.
//!
//! Three steps share one stack of convolution blocks and one word-embedding
//! table. Step 1 runs a description through the blocks with pooling between
//! them to produce a relation embedding. Step 2 turns that embedding into
//! head- and tail-side traits by attending over two pairs of external memory
//! matrices. Step 3 encodes entity descriptions with the same blocks, but
//! reweights the first layer's hidden states by their cosine similarity to
//! the trait and runs self-attention before each later pooling stage.
//!
//! All operations build onto a [`Graph`], which bundles the tape, the lazy
//! parameter binder, and the model configuration; call them inside a
//! recording graph for training or a non-recording one for evaluation.

use alloc::format;
use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::data::{Description, PAD_ID};
use crate::diff::{ops, Binder, Gradients, NodeId, ParameterSet, Tape, Tensor};
use crate::diff::xavier_init;
use crate::rng::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("sequence of length {len} is too short (need at least {need})")]
    SequenceTooShort { len: usize, need: usize },
}

/// One forward-pass construction site: the tape being written, the binder
/// that places each named weight on it once, and the configuration the
/// architecture is read from.
pub struct Graph<'a> {
    pub tape: Tape,
    pub binder: Binder,
    pub params: &'a ParameterSet,
    pub config: &'a ModelConfig,
}

impl<'a> Graph<'a> {
    pub fn new(params: &'a ParameterSet, config: &'a ModelConfig, recording: bool) -> Self {
        Self { tape: Tape::new(recording), binder: Binder::new(), params, config }
    }

    /// The tape node for a named parameter.
    pub fn p(&mut self, name: &str) -> NodeId {
        self.binder.node(&mut self.tape, self.params, name)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.tape.value(id)
    }

    /// Runs backward from a scalar loss and collects per-parameter
    /// gradients, zeros for parameters the pass never used.
    pub fn parameter_grads(&self, root: NodeId) -> ParameterSet {
        let g: Gradients = self.tape.backward(root);
        self.binder.grads(&g, self.params)
    }
}

/// Registers the embedding table, convolution blocks, attention projections,
/// and memory matrices. Everything is Xavier-initialized, biases and
/// normalization affine terms included, so a fresh model has no dead
/// channels (the instance norm would wipe constant shifts otherwise).
pub fn register_encoder_params(
    params: &mut ParameterSet,
    config: &ModelConfig,
    vocab_size: usize,
    rng: &mut ChaCha8Rng,
) {
    let u = config.embed_dim;
    let k = config.filter_width;
    let m = config.n_memories;
    let mut add = |name: &str, dims: &[usize], rng: &mut ChaCha8Rng| {
        params.insert(name, xavier_init(dims, rng));
    };
    add("embed.words", &[vocab_size, u], rng);
    for i in 1..=config.n_layers {
        add(&format!("enc.block{i}.conv1.w"), &[u, k, u], rng);
        add(&format!("enc.block{i}.conv1.b"), &[u], rng);
        add(&format!("enc.block{i}.conv2.w"), &[u, k, u], rng);
        add(&format!("enc.block{i}.conv2.b"), &[u], rng);
        add(&format!("enc.block{i}.norm.gamma"), &[u], rng);
        add(&format!("enc.block{i}.norm.beta"), &[u], rng);
    }
    for l in 2..=config.n_layers {
        for proj in ["q", "k", "v"] {
            add(&format!("enc.attn{l}.w{proj}"), &[u, u], rng);
            add(&format!("enc.attn{l}.b{proj}"), &[u], rng);
        }
    }
    for mem in ["rel_head", "ent_head", "rel_tail", "ent_tail"] {
        add(&format!("mem.{mem}"), &[m, u], rng);
    }
}

/// Token ids padded with PAD up to the length the pooling stack needs.
fn pad_ids(desc: &Description, min_len: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = desc.token_ids().iter().map(|&t| t as usize).collect();
    while ids.len() < min_len {
        ids.push(PAD_ID as usize);
    }
    ids
}

fn embed(g: &mut Graph, desc: &Description) -> NodeId {
    let ids = pad_ids(desc, g.config.min_len());
    let table = g.p("embed.words");
    ops::gather_rows(&mut g.tape, table, &ids)
}

/// One convolution block: conv -> conv -> instance norm -> tanh, length
/// preserving. `index` selects the parameter group (1-based).
pub fn conv_block(g: &mut Graph, states: NodeId, index: usize) -> Result<NodeId, EncodeError> {
    let len = g.value(states).rows();
    if len == 0 {
        return Err(EncodeError::SequenceTooShort { len: 0, need: 1 });
    }
    let w1 = g.p(&format!("enc.block{index}.conv1.w"));
    let b1 = g.p(&format!("enc.block{index}.conv1.b"));
    let w2 = g.p(&format!("enc.block{index}.conv2.w"));
    let b2 = g.p(&format!("enc.block{index}.conv2.b"));
    let gamma = g.p(&format!("enc.block{index}.norm.gamma"));
    let beta = g.p(&format!("enc.block{index}.norm.beta"));
    let eps = g.config.instance_norm_eps;
    let h = ops::conv1d_same(&mut g.tape, states, w1, b1);
    let h = ops::conv1d_same(&mut g.tape, h, w2, b2);
    let h = ops::instance_norm(&mut g.tape, h, gamma, beta, eps);
    Ok(ops::tanh(&mut g.tape, h))
}

/// Single-head scaled dot-product self-attention with learned projections.
/// `layer` selects the parameter group (2-based: the first layer never
/// attends).
pub fn self_attention(g: &mut Graph, states: NodeId, layer: usize) -> NodeId {
    let wq = g.p(&format!("enc.attn{layer}.wq"));
    let bq = g.p(&format!("enc.attn{layer}.bq"));
    let wk = g.p(&format!("enc.attn{layer}.wk"));
    let bk = g.p(&format!("enc.attn{layer}.bk"));
    let wv = g.p(&format!("enc.attn{layer}.wv"));
    let bv = g.p(&format!("enc.attn{layer}.bv"));
    let q = ops::linear_rows(&mut g.tape, states, wq, bq);
    let k = ops::linear_rows(&mut g.tape, states, wk, bk);
    let v = ops::linear_rows(&mut g.tape, states, wv, bv);
    let scores = ops::matmul_nt(&mut g.tape, q, k);
    let scaled = ops::scale(&mut g.tape, scores, 1.0 / libm::sqrt(g.config.embed_dim as f64));
    let weights = ops::softmax_rows(&mut g.tape, scaled);
    ops::matmul(&mut g.tape, weights, v)
}

fn pool(g: &mut Graph, states: NodeId, layer: usize) -> NodeId {
    if layer < g.config.n_layers {
        ops::max_pool(&mut g.tape, states, g.config.pool_stride)
    } else {
        ops::mean_pool(&mut g.tape, states)
    }
}

/// Step 1: description to relation embedding. No attention, no trait; max
/// pooling after each block but the last, mean pooling after the last.
pub fn encode_relation(g: &mut Graph, d_r: &Description) -> Result<NodeId, EncodeError> {
    let mut x = embed(g, d_r);
    for layer in 1..=g.config.n_layers {
        x = conv_block(g, x, layer)?;
        x = pool(g, x, layer);
    }
    Ok(x)
}

/// Step 2: attention over a memory pair. Weights are the softmax of cosine
/// similarities between the relation embedding and each relation-memory
/// row; the trait is the matching convex combination of entity-memory rows.
pub fn compute_trait(g: &mut Graph, o_r: NodeId, rel_memory: &str, ent_memory: &str) -> NodeId {
    let m_rel = g.p(rel_memory);
    let m_ent = g.p(ent_memory);
    let cos = ops::cos_rows(&mut g.tape, m_rel, o_r, g.config.cosine_eps);
    let a = ops::softmax_vec(&mut g.tape, cos);
    ops::matvec_t(&mut g.tape, m_ent, a)
}

/// Step 3: description to entity embedding. The first block's hidden states
/// are reweighted per position by softmaxed cosine similarity to the trait
/// (skipped when `use_trait` is off); later layers self-attend before
/// pooling.
pub fn encode_entity(
    g: &mut Graph,
    d_e: &Description,
    trait_vec: Option<NodeId>,
    use_trait: bool,
) -> Result<NodeId, EncodeError> {
    let mut x = embed(g, d_e);
    x = conv_block(g, x, 1)?;
    if use_trait {
        let t = trait_vec.expect("trait required when use_trait is on");
        let cos = ops::cos_rows(&mut g.tape, x, t, g.config.cosine_eps);
        let a = ops::softmax_vec(&mut g.tape, cos);
        x = ops::scale_rows(&mut g.tape, x, a);
    }
    x = pool(g, x, 1);
    for layer in 2..=g.config.n_layers {
        x = conv_block(g, x, layer)?;
        x = self_attention(g, x, layer);
        x = pool(g, x, layer);
    }
    Ok(x)
}

/// Tape nodes for one encoded triplet.
#[derive(Debug, Clone, Copy)]
pub struct TripletNodes {
    pub head: NodeId,
    pub relation: NodeId,
    pub tail: NodeId,
}

/// Encoded triplet values, detached from any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletEmbeddings {
    pub head: Tensor,
    pub relation: Tensor,
    pub tail: Tensor,
}

/// Runs all three steps: the relation embedding feeds two trait lookups
/// (head-side and tail-side memories), which guide the two entity encodings.
pub fn encode_triplet(
    g: &mut Graph,
    d_h: &Description,
    d_r: &Description,
    d_t: &Description,
    use_trait: bool,
) -> Result<TripletNodes, EncodeError> {
    let o_r = encode_relation(g, d_r)?;
    let (t_rh, t_rt) = if use_trait {
        (
            Some(compute_trait(g, o_r, "mem.rel_head", "mem.ent_head")),
            Some(compute_trait(g, o_r, "mem.rel_tail", "mem.ent_tail")),
        )
    } else {
        (None, None)
    };
    let head = encode_entity(g, d_h, t_rh, use_trait)?;
    let tail = encode_entity(g, d_t, t_rt, use_trait)?;
    Ok(TripletNodes { head, relation: o_r, tail })
}

/// Evaluation-mode convenience: encodes on a throwaway non-recording graph
/// and returns plain tensors.
pub fn encode_triplet_values(
    params: &ParameterSet,
    config: &ModelConfig,
    d_h: &Description,
    d_r: &Description,
    d_t: &Description,
) -> Result<TripletEmbeddings, EncodeError> {
    let mut g = Graph::new(params, config, false);
    let nodes = encode_triplet(&mut g, d_h, d_r, d_t, config.use_trait)?;
    Ok(TripletEmbeddings {
        head: g.value(nodes.head).clone(),
        relation: g.value(nodes.relation).clone(),
        tail: g.value(nodes.tail).clone(),
    })
}
