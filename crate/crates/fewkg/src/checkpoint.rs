//! Flat binary checkpoint format for parameter sets.
//!
//! Layout (all integers little-endian):
//!   magic  b"FKGC"
//!   version u32 (currently 1)
//!   count  u64
//!   count records, sorted by name:
//!     name_len u32, name bytes (utf-8)
//!     n_dims u32, each dim as u64
//!     prod(dims) f64 values
//! No trailing bytes. Saving iterates the set in its (sorted) order and
//! loading preserves it, so save -> load -> save is byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use fewkg_core::diff::{ParameterSet, Tensor};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"FKGC";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
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
    #[error("corrupt checkpoint {}: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },
}

pub fn save_checkpoint(path: &Path, params: &ParameterSet) -> Result<(), CheckpointError> {
    let mut buf = Vec::with_capacity(16 + params.n_scalars() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for (name, tensor) in params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(tensor.dims().len() as u32).to_le_bytes());
        for &d in tensor.dims() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in tensor.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|source| CheckpointError::Write { path: path.to_path_buf(), source })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> CheckpointError {
        CheckpointError::Corrupt { path: self.path.to_path_buf(), reason: reason.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(self.corrupt(format!("truncated while reading {what}"))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<ParameterSet, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Read { path: path.to_path_buf(), source })?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    if r.take(4, "magic")? != MAGIC {
        return Err(r.corrupt("bad magic"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.corrupt(format!("unsupported version {version}")));
    }
    let count = r.u64("parameter count")?;
    let mut params = ParameterSet::new();
    for i in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name_bytes = r.take(name_len, "name")?;
        let name = core::str::from_utf8(name_bytes)
            .map_err(|_| r.corrupt(format!("parameter {i}: name is not utf-8")))?
            .to_string();
        let n_dims = r.u32("dim count")? as usize;
        let mut dims = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            dims.push(r.u64("dim")? as usize);
        }
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(r.take(8, "value")?.try_into().unwrap()));
        }
        params.insert(&name, Tensor::from_vec(&dims, data));
    }
    if params.len() as u64 != count {
        return Err(r.corrupt("duplicate parameter names"));
    }
    if r.pos != bytes.len() {
        return Err(r.corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(params)
}

/// One line of `inspect` output.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub dims: Vec<usize>,
    pub l2_norm: f64,
}

/// Read-only summary of a checkpoint: per-parameter shape and L2 norm.
pub fn inspect_checkpoint(path: &Path) -> Result<Vec<ParamSummary>, CheckpointError> {
    let params = load_checkpoint(path)?;
    Ok(params
        .iter()
        .map(|(name, t)| ParamSummary {
            name: name.to_string(),
            dims: t.dims().to_vec(),
            l2_norm: t.data().iter().map(|x| x * x).sum::<f64>().sqrt(),
        })
        .collect())
}
