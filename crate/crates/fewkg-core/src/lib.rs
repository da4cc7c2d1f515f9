//! Few-shot knowledge-graph completion at desk scale.
//!
//! The crate implements the full learning stack for tail prediction on
//! relations with only k support triplets:
//!
//! - [`data`]: datasets with textual descriptions, tokenization, task and
//!   negative sampling, and a deterministic synthetic-graph generator whose
//!   correct tails are recoverable from text alone.
//! - [`diff`]: a tape-based reverse-mode autodiff substrate over dense f64
//!   tensors, plus Xavier initialization, Adam, and a finite-difference
//!   gradient oracle.
//! - [`encoder`]: the description encoder (stacked conv blocks, relation
//!   traits addressed from external memories, self-attention before pooling).
//! - [`tcvae`]: the triplet conditional VAE used to generate embedding-level
//!   augmentations conditioned on a relation embedding.
//! - [`objective`]: L1 translation scoring, margin hinge, and the combined
//!   training loss.
//! - [`meta`]: Reptile meta-training and k-shot meta-test adaptation.
//! - [`eval`]: ranking with pessimistic tie handling, MRR and Hits@P.
//!
//! Everything here is `no_std` (alloc required). File formats, checkpoints,
//! and the command-line front end live in the companion `fewkg` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod config;
pub mod data;
pub mod diff;
pub mod encoder;
pub mod eval;
pub mod meta;
pub mod objective;
pub mod rng;
pub mod tcvae;
