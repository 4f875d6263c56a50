//! Checkpoints: a genotype document describing the layout plus a binary blob
//! of named tensors.
//!
//! Blob layout, all little-endian: magic, version and tensor count as `u32`,
//! then per tensor its name length and UTF-8 name, its rank and dimensions
//! as `u32`, and its data as `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use ddarts_autodiff::Tensor;
use ddarts_core::document::{deserialize, serialize};
use ddarts_core::{AlphaTable, Genotype};

use crate::data::Reader;
use crate::engine::SearchState;
use crate::error::FormatError;

pub const BLOB_MAGIC: u32 = u32::from_le_bytes(*b"DDCK");
pub const BLOB_VERSION: u32 = 1;

pub type NamedTensors = Vec<(String, Tensor)>;

pub fn encode_blob(tensors: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    let word = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(&BLOB_MAGIC.to_le_bytes());
    out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    word(&mut out, tensors.len());
    for (name, t) in tensors {
        word(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        word(&mut out, t.shape().len());
        for &d in t.shape() {
            word(&mut out, d);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_blob(bytes: &[u8]) -> Result<NamedTensors, FormatError> {
    let mut r = Reader::new(bytes);
    let magic = r.u32()?;
    if magic != BLOB_MAGIC {
        return Err(FormatError::Magic { found: magic });
    }
    let version = r.u32()?;
    if version != BLOB_VERSION {
        return Err(FormatError::Version(version));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| FormatError::Invalid(format!("tensor name is not UTF-8: {e}")))?
            .to_owned();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let bytes_needed = shape.iter().try_fold(8usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
        if bytes_needed > r.remaining() {
            return Err(FormatError::Truncated {
                offset: bytes.len() - r.remaining(),
                needed: bytes_needed - r.remaining(),
            });
        }
        let n = bytes_needed / 8;
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let t = Tensor::new(shape, data).map_err(|e| FormatError::Invalid(e.to_string()))?;
        out.push((name, t));
    }
    if r.remaining() != 0 {
        return Err(FormatError::Invalid(format!("{} trailing bytes", r.remaining())));
    }
    Ok(out)
}

pub fn alpha_name(group: usize) -> String {
    format!("alpha/group{group}")
}

/// One `[edges, K]` tensor per share group.
pub fn alpha_tensors(alpha: &AlphaTable) -> NamedTensors {
    let k = alpha.op_count();
    alpha
        .tables
        .iter()
        .enumerate()
        .map(|(g, t)| {
            let data: Vec<f64> = t.iter().flatten().copied().collect();
            (alpha_name(g), Tensor::new(vec![t.len(), k], data).expect("rectangular table"))
        })
        .collect()
}

/// Rebuilds the logits for `layout`'s shape and share groups.
pub fn load_alpha(layout: &Genotype, tensors: &[(String, Tensor)]) -> Result<AlphaTable, FormatError> {
    let mut alpha = AlphaTable::filled_like(layout, 0.0);
    let k = alpha.op_count();
    for (g, table) in alpha.tables.iter_mut().enumerate() {
        let name = alpha_name(g);
        let (_, t) = tensors
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| FormatError::Invalid(format!("missing tensor {name}")))?;
        if t.shape() != [table.len(), k] {
            return Err(FormatError::Invalid(format!(
                "{name} has shape {:?}, layout needs [{}, {k}]",
                t.shape(),
                table.len()
            )));
        }
        for (row, chunk) in table.iter_mut().zip(t.data().chunks(k)) {
            row.copy_from_slice(chunk);
        }
    }
    alpha.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(alpha)
}

/// Supernet weights under `weights/` and the logits under `alpha/`.
pub fn state_tensors(state: &SearchState) -> NamedTensors {
    let mut out: NamedTensors =
        state.network.params().iter().map(|(n, t)| (format!("weights/{n}"), t.clone())).collect();
    out.extend(alpha_tensors(&state.alpha));
    out
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

/// Writes `<stem>.json` and `<stem>.bin`.
pub fn save(stem: &Path, layout: &Genotype, tensors: &[(String, Tensor)]) -> Result<(), FormatError> {
    let (doc, blob) = paths(stem);
    fs::write(doc, serialize(layout))?;
    fs::write(blob, encode_blob(tensors))?;
    Ok(())
}

pub fn load(stem: &Path) -> Result<(Genotype, NamedTensors), FormatError> {
    let (doc, blob) = paths(stem);
    let layout = deserialize(&fs::read(doc)?)?;
    Ok((layout, decode_blob(&fs::read(blob)?)?))
}
