//! Dataset directory layout: `entities.tsv`, `relations.tsv`,
//! `triplets.tsv`, `splits.json`. Parsing and validation live in the core
//! crate; this module only moves bytes.

use std::fs;
use std::path::{Path, PathBuf};

use fewkg_core::data::{
    build_dataset, parse_pairs_tsv, parse_splits_json, parse_triplets_tsv, DataError,
    KnowledgeGraphDataset, SyntheticFiles,
};
use thiserror::Error;

pub const ENTITIES_FILE: &str = "entities.tsv";
pub const RELATIONS_FILE: &str = "relations.tsv";
pub const TRIPLETS_FILE: &str = "triplets.tsv";
pub const SPLITS_FILE: &str = "splits.json";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing dataset file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("failed to read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

fn read_file(dir: &Path, name: &str) -> Result<String, IoError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(IoError::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(|source| IoError::Read { path, source })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), IoError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| IoError::Write { path, source })
}

/// Loads the four dataset files from `dir` and assembles the in-memory
/// dataset, truncating descriptions to `max_desc_len` tokens.
pub fn load_dataset(dir: &Path, max_desc_len: usize) -> Result<KnowledgeGraphDataset, IoError> {
    let entities = parse_pairs_tsv(&read_file(dir, ENTITIES_FILE)?, ENTITIES_FILE)?;
    let relations = parse_pairs_tsv(&read_file(dir, RELATIONS_FILE)?, RELATIONS_FILE)?;
    let triplets = parse_triplets_tsv(&read_file(dir, TRIPLETS_FILE)?)?;
    let splits = parse_splits_json(&read_file(dir, SPLITS_FILE)?)?;
    Ok(build_dataset(&entities, &relations, &triplets, &splits, max_desc_len)?)
}

/// Writes a rendered synthetic dataset into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, files: &SyntheticFiles) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|source| IoError::Write { path: dir.to_path_buf(), source })?;
    write_file(dir, ENTITIES_FILE, &files.entities_tsv)?;
    write_file(dir, RELATIONS_FILE, &files.relations_tsv)?;
    write_file(dir, TRIPLETS_FILE, &files.triplets_tsv)?;
    write_file(dir, SPLITS_FILE, &files.splits_json)
}
