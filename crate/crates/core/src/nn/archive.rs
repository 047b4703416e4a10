//! Single-file tensor archive.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"CNTA" | version: u32 | manifest_len: u64 | manifest (JSON) | payload
//! ```
//!
//! The manifest lists every tensor's name, shape and byte offset into the
//! payload, which holds the tensors back to back as little-endian `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NnError;

const MAGIC: &[u8; 4] = b"CNTA";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        let t = Self {
            name: name.into(),
            shape,
            data,
        };
        assert_eq!(t.shape.iter().product::<usize>(), t.data.len(), "tensor {} shape mismatch", t.name);
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

pub fn write_archive<W: Write>(mut w: W, tensors: &[Tensor]) -> Result<(), NnError> {
    let mut offset = 0u64;
    let manifest: Vec<ArchiveEntry> = tensors
        .iter()
        .map(|t| {
            let e = ArchiveEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                offset,
            };
            offset += 4 * t.data.len() as u64;
            e
        })
        .collect();
    let manifest = serde_json::to_vec(&manifest).map_err(|e| NnError::Archive(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(manifest.len() as u64).to_le_bytes())?;
    w.write_all(&manifest)?;
    for t in tensors {
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_archive<R: Read>(mut r: R) -> Result<Vec<Tensor>, NnError> {
    let truncated = |what: &str| NnError::Archive(format!("truncated archive while reading {what}"));
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| truncated("header"))?;
    if &head[..4] != MAGIC {
        return Err(NnError::Archive("not a tensor archive (bad magic)".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(NnError::Archive(format!("unsupported archive version {version}")));
    }
    let manifest_len = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let mut manifest = vec![0u8; manifest_len];
    r.read_exact(&mut manifest).map_err(|_| truncated("manifest"))?;
    let entries: Vec<ArchiveEntry> =
        serde_json::from_slice(&manifest).map_err(|e| NnError::Archive(format!("bad manifest: {e}")))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;

    entries
        .into_iter()
        .map(|e| {
            let count: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let end = start + 4 * count;
            let bytes = payload.get(start..end).ok_or_else(|| truncated(&e.name))?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Tensor {
                name: e.name,
                shape: e.shape,
                data,
            })
        })
        .collect()
}

pub fn save_archive(path: &Path, tensors: &[Tensor]) -> Result<(), NnError> {
    write_archive(BufWriter::new(File::create(path)?), tensors)
}

pub fn load_archive(path: &Path) -> Result<Vec<Tensor>, NnError> {
    read_archive(BufReader::new(File::open(path)?))
}
