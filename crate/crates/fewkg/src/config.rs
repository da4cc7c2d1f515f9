//! Declarative experiment configuration (TOML on disk). Unknown keys are
//! rejected everywhere; CLI flags override file values via [`Overrides`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fewkg_core::config::{EvalConfig, LossWeights, ModelConfig, Settings, TrainConfig};
use fewkg_core::data::SyntheticSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Where the dataset comes from: a directory of files or a generated one.
/// Exactly one of the two must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSource {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

impl Default for DatasetSource {
    fn default() -> Self {
        Self { path: None, synthetic: Some(SyntheticSpec::default()) }
    }
}

/// A full experiment: name, dataset, seeds, and every hyper-parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run name; becomes the output subdirectory.
    pub name: String,
    /// Seeds for independent repetitions; metrics are averaged across them.
    pub seeds: Vec<u64>,
    pub dataset: DatasetSource,
    pub model: ModelConfig,
    pub loss: LossWeights,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".to_string(),
            seeds: vec![1, 2, 3, 4],
            dataset: DatasetSource::default(),
            model: ModelConfig::default(),
            loss: LossWeights::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// CLI flag overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Replaces the seed list with this single seed.
    pub seed: Option<u64>,
    pub k_shot: Option<usize>,
    pub no_trait: bool,
    pub no_tcvae: bool,
    pub filtered: bool,
}

impl ExperimentConfig {
    /// The bundle consumed by training and evaluation.
    pub fn settings(&self) -> Settings {
        Settings {
            model: self.model.clone(),
            loss: self.loss.clone(),
            train: self.train.clone(),
            eval: self.eval.clone(),
        }
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seeds = vec![seed];
        }
        if let Some(k) = o.k_shot {
            self.eval.k_shot = k;
        }
        if o.no_trait {
            self.model.use_trait = false;
        }
        if o.no_tcvae {
            self.model.use_tcvae = false;
        }
        if o.filtered {
            self.eval.filtered = true;
        }
    }

    /// Checks every field against its domain. Collecting all violations at
    /// once keeps config editing to a single round trip.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = String::new();
        let mut bad = |msg: &str| {
            if !problems.is_empty() {
                problems.push_str("; ");
            }
            problems.push_str(msg);
        };

        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            bad("name must be non-empty and use only [A-Za-z0-9_-]");
        }
        if self.seeds.is_empty() {
            bad("seeds must not be empty");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            bad("seeds must be distinct");
        }
        match (&self.dataset.path, &self.dataset.synthetic) {
            (Some(_), Some(_)) => bad("dataset.path and dataset.synthetic are mutually exclusive"),
            (None, None) => bad("one of dataset.path or dataset.synthetic is required"),
            _ => {}
        }

        let m = &self.model;
        if m.embed_dim < 1 {
            bad("model.embed_dim must be at least 1");
        }
        if m.n_layers < 1 {
            bad("model.n_layers must be at least 1");
        }
        if m.n_memories < 1 {
            bad("model.n_memories must be at least 1");
        }
        if m.filter_width < 1 || m.filter_width % 2 == 0 {
            bad("model.filter_width must be odd");
        }
        if !matches!(m.pool_stride, 2 | 4) {
            bad("model.pool_stride must be 2 or 4");
        }
        if m.latent_dim < 1 {
            bad("model.latent_dim must be at least 1");
        }
        if !(m.instance_norm_eps > 0.0) {
            bad("model.instance_norm_eps must be positive");
        }
        if !(m.cosine_eps > 0.0) {
            bad("model.cosine_eps must be positive");
        }
        if !(m.log_sigma_clamp > 0.0) {
            bad("model.log_sigma_clamp must be positive");
        }
        if m.n_layers >= 1 && m.max_desc_len < m.min_len() {
            let mut msg = String::new();
            let _ = write!(
                msg,
                "model.max_desc_len must be at least {} to survive {} pooling layers of stride {}",
                m.min_len(),
                m.n_layers - 1,
                m.pool_stride
            );
            bad(&msg);
        }

        if !(self.loss.margin > 0.0) {
            bad("loss.margin must be positive");
        }
        if !(self.loss.lambda_kld >= 0.0) {
            bad("loss.lambda_kld must be non-negative");
        }
        if !(self.loss.lambda_reg >= 0.0) {
            bad("loss.lambda_reg must be non-negative");
        }

        let t = &self.train;
        if t.batch_tasks < 1 {
            bad("train.batch_tasks must be at least 1");
        }
        if t.inner_steps < 1 {
            bad("train.inner_steps must be at least 1");
        }
        if !(t.inner_lr > 0.0) {
            bad("train.inner_lr must be positive");
        }
        if !(t.outer_lr > 0.0) {
            bad("train.outer_lr must be positive");
        }
        if t.iterations_per_epoch < 1 {
            bad("train.iterations_per_epoch must be at least 1");
        }
        if t.max_epochs < 1 {
            bad("train.max_epochs must be at least 1");
        }

        if self.eval.k_shot < 1 {
            bad("eval.k_shot must be at least 1");
        }
        if self.eval.hits_at.is_empty() || self.eval.hits_at.iter().any(|&p| p < 1) {
            bad("eval.hits_at must list cutoffs of at least 1");
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

/// Reads, parses, and validates a TOML config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    config.validate()?;
    Ok(config)
}
