//! Decoding of the on-disk dataset formats into rows.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::dataset::RawSplits;
use super::DataError;

fn rows(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}

/// entities.tsv / relations.tsv: `id<TAB>description`, no header.
pub fn parse_pairs_tsv(text: &str, file: &'static str) -> Result<Vec<(String, String)>, DataError> {
    rows(text)
        .map(|(line, row)| {
            let (id, desc) = row.split_once('\t').ok_or(DataError::Malformed {
                file,
                line,
                message: "expected `id<TAB>description`".to_string(),
            })?;
            Ok((id.to_string(), desc.to_string()))
        })
        .collect()
}

/// triplets.tsv: `head<TAB>relation<TAB>tail`.
pub fn parse_triplets_tsv(text: &str) -> Result<Vec<(String, String, String)>, DataError> {
    rows(text)
        .map(|(line, row)| {
            let mut parts = row.split('\t');
            match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(h), Some(r), Some(t), None) => {
                    Ok((h.to_string(), r.to_string(), t.to_string()))
                }
                _ => Err(DataError::Malformed {
                    file: "triplets.tsv",
                    line,
                    message: "expected `head<TAB>relation<TAB>tail`".to_string(),
                }),
            }
        })
        .collect()
}

/// splits.json: `{"train": [...], "val": [...], "test": [...]}`.
pub fn parse_splits_json(text: &str) -> Result<RawSplits, DataError> {
    serde_json::from_str(text).map_err(|e| DataError::Malformed {
        file: "splits.json",
        line: 0,
        message: alloc::format!("{e}"),
    })
}
