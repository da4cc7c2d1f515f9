//! Experiment harness around `fewkg-core`: dataset files, checkpoints,
//! declarative experiment configs, and multi-seed orchestration. The binary
//! in `main.rs` is a thin CLI over these modules.

pub mod checkpoint;
pub mod config;
pub mod experiment;
pub mod io;
