//! EMB1 embedding container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic    4 bytes  "EMB1"
//! version  u32      1
//! n        u32      number of rows
//! dim      u32      embedding width
//! ids      n x (u16 byte length, UTF-8 bytes)
//! data     n * dim f32, row-major
//! ```

use std::fs;
use std::path::Path;

use lifespan_core::{DatasetError, EmbeddingStore};

use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum Emb1Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}, expected \"EMB1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported EMB1 version {0}")]
    BadVersion(u32),
    #[error("truncated EMB1 file: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after the EMB1 payload")]
    TrailingBytes(usize),
    #[error("id at row {0} is not valid UTF-8")]
    BadId(usize),
    #[error("id {0:?} is longer than 65535 bytes")]
    IdTooLong(String),
    #[error("row count {0} does not fit in u32")]
    TooManyRows(usize),
    #[error(transparent)]
    Store(#[from] DatasetError),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Emb1Error> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Emb1Error::Truncated {
                offset: self.pos,
                needed: n - available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, Emb1Error> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, Emb1Error> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Exact encoded size of a store.
pub fn encoded_len(store: &EmbeddingStore) -> usize {
    HEADER_LEN + store.ids().iter().map(|id| 2 + id.len()).sum::<usize>() + store.data().len() * 4
}

pub fn encode(store: &EmbeddingStore) -> Result<Vec<u8>, Emb1Error> {
    let n = u32::try_from(store.len()).map_err(|_| Emb1Error::TooManyRows(store.len()))?;
    let dim = u32::try_from(store.dim()).map_err(|_| Emb1Error::TooManyRows(store.dim()))?;
    let mut out = Vec::with_capacity(encoded_len(store));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for id in store.ids() {
        let len = u16::try_from(id.len()).map_err(|_| Emb1Error::IdTooLong(id.clone()))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for v in store.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingStore, Emb1Error> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if &magic != MAGIC {
        return Err(Emb1Error::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Emb1Error::BadVersion(version));
    }
    let n = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for row in 0..n {
        let len = r.u16()? as usize;
        let raw = r.take(len)?;
        ids.push(String::from_utf8(raw.to_vec()).map_err(|_| Emb1Error::BadId(row))?);
    }
    let payload = r.take(n * dim * 4)?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let trailing = bytes.len() - r.pos;
    if trailing != 0 {
        return Err(Emb1Error::TrailingBytes(trailing));
    }
    Ok(EmbeddingStore::new(ids, dim, data)?)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingStore, Emb1Error> {
    decode(&fs::read(path)?)
}

pub fn write_embeddings(store: &EmbeddingStore, path: &Path) -> Result<(), Emb1Error> {
    fsutil::write_atomic(path, &encode(store)?)?;
    Ok(())
}
