//! Model, loss, training, and evaluation configuration.
//!
//! Defaults follow the published configuration: u=100 channels, N=3 encoder
//! layers, 128 memory rows, width-3 filters, pool stride 2, 50 latent
//! dimensions, batch of 8 tasks, 5 inner steps, both learning rates 1e-3,
//! 8 generated triplets. Fields the source leaves open (margin, KL sign,
//! epsilons, clamps, tie handling) carry the defaults documented on each
//! field.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Architecture of the description encoder and the triplet CVAE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Embedding width u; also the convolution filter count everywhere.
    pub embed_dim: usize,
    /// Encoder depth N (conv blocks; the first N-1 are followed by max
    /// pooling, the last by mean pooling).
    pub n_layers: usize,
    /// Rows m in each of the four external memory matrices.
    pub n_memories: usize,
    /// Width of the encoder convolution filters (odd).
    pub filter_width: usize,
    /// Max-pooling stride (2 or 4).
    pub pool_stride: usize,
    /// Latent dimension d_z of the CVAE.
    pub latent_dim: usize,
    /// Trait reweighting of the first conv layer's states (ablation flag).
    pub use_trait: bool,
    /// CVAE losses during training and generated triplets at meta-test
    /// (ablation flag; when false the augmentation count is forced to 0).
    pub use_tcvae: bool,
    /// Variance epsilon of instance normalization.
    pub instance_norm_eps: f64,
    /// Added to each norm inside cosine similarity to guard zero vectors.
    pub cosine_eps: f64,
    /// log sigma outputs are clamped to +-this before exponentiation.
    pub log_sigma_clamp: f64,
    /// Descriptions are truncated to this many tokens.
    pub max_desc_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 100,
            n_layers: 3,
            n_memories: 128,
            filter_width: 3,
            pool_stride: 2,
            latent_dim: 50,
            use_trait: true,
            use_tcvae: true,
            instance_norm_eps: 1e-5,
            cosine_eps: 1e-8,
            log_sigma_clamp: 10.0,
            max_desc_len: 200,
        }
    }
}

impl ModelConfig {
    /// Shortest sequence that survives the N-1 pooling layers with at least
    /// two positions left for the final block.
    pub fn min_len(&self) -> usize {
        self.pool_stride.pow(self.n_layers as u32 - 1) * 2
    }
}

/// Sign convention for the KL term in the combined loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KldSign {
    /// Verbatim printed form: L = L_kgc - L_rec - l1*L_kld - l2*L_reg.
    Paper,
    /// Standard ELBO direction: the KL term enters with +l1.
    Elbo,
}

/// Margin and loss-term weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// Hinge margin, must be positive.
    pub margin: f64,
    /// Weight of the KL term.
    pub lambda_kld: f64,
    /// Weight of the prior regularizer.
    pub lambda_reg: f64,
    pub kld_sign: KldSign,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { margin: 1.0, lambda_kld: 1.0, lambda_reg: 1.0, kld_sign: KldSign::Paper }
    }
}

/// Optimizer for the inner adaptation loop. Plain gradient descent exists as
/// a test hook for the first-order update identity; real runs use Adam.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerOptimizer {
    Adam,
    Sgd,
}

/// Reptile meta-training schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Tasks per outer iteration (B).
    pub batch_tasks: usize,
    /// Adaptation steps per task (S).
    pub inner_steps: usize,
    /// Inner learning rate (alpha_1).
    pub inner_lr: f64,
    /// Outer interpolation rate (alpha_2).
    pub outer_lr: f64,
    /// Generated triplets per meta-test relation (K).
    pub n_generated: usize,
    /// Outer iterations between validation passes.
    pub iterations_per_epoch: usize,
    pub max_epochs: usize,
    pub inner_optimizer: InnerOptimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_tasks: 8,
            inner_steps: 5,
            inner_lr: 1e-3,
            outer_lr: 1e-3,
            n_generated: 8,
            iterations_per_epoch: 100,
            max_epochs: 50,
            inner_optimizer: InnerOptimizer::Adam,
        }
    }
}

/// Rank assigned to the correct tail when other candidates tie its score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Ties count against the target: rank = 1 + #smaller + #tied-others.
    Pessimistic,
    /// Ties are ignored: rank = 1 + #smaller.
    Optimistic,
}

/// Ranking evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Support triplets sampled per meta-test relation.
    pub k_shot: usize,
    /// Cutoffs P for Hits@P.
    pub hits_at: Vec<usize>,
    /// Drop other known-true tails from the candidate set.
    pub filtered: bool,
    pub tie_break: TieBreak,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k_shot: 1, hits_at: vec![1, 5, 10], filtered: false, tie_break: TieBreak::Pessimistic }
    }
}

/// Bundle threaded through training and evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub model: ModelConfig,
    pub loss: LossWeights,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Settings {
    /// Augmentation count honoring the CVAE ablation flag.
    pub fn effective_n_generated(&self) -> usize {
        if self.model.use_tcvae {
            self.train.n_generated
        } else {
            0
        }
    }
}
