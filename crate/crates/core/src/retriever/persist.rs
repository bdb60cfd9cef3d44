//! Binary index file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "ITRGIDX\0"
//! version      u32
//! dim          u32
//! count        u64
//! label_len    u32, then label_len bytes of UTF-8 embedder label
//! doc ids      count x (u32 length, UTF-8 bytes)
//! vectors      count x dim x f64
//! ```

use std::fs;
use std::path::Path;

use super::{DenseIndex, RetrieverError};

pub const INDEX_MAGIC: [u8; 8] = *b"ITRGIDX\0";
pub const INDEX_VERSION: u32 = 1;

pub fn encode_index(index: &DenseIndex) -> Vec<u8> {
    let label = index.embedder_label().as_bytes();
    let mut buf = Vec::with_capacity(
        32 + label.len() + index.len() * (8 + index.dim() * 8),
    );
    buf.extend_from_slice(&INDEX_MAGIC);
    buf.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    buf.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(index.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(label.len() as u32).to_le_bytes());
    buf.extend_from_slice(label);
    for id in index.doc_ids() {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    for v in index.raw_vectors() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], RetrieverError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| RetrieverError::Format(format!("truncated while reading {what}")))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, RetrieverError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, RetrieverError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, len: usize, what: &str) -> Result<String, RetrieverError> {
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| RetrieverError::Format(format!("{what} is not valid UTF-8")))
    }
}

pub fn decode_index(buf: &[u8]) -> Result<DenseIndex, RetrieverError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8, "magic")? != INDEX_MAGIC {
        return Err(RetrieverError::Format("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != INDEX_VERSION {
        return Err(RetrieverError::Format(format!("unsupported version {version}")));
    }
    let dim = r.u32("dim")? as usize;
    let count = r.u64("count")? as usize;
    if dim == 0 || count == 0 {
        return Err(RetrieverError::Format("empty index".into()));
    }
    let label_len = r.u32("label length")? as usize;
    let label = r.string(label_len, "embedder label")?;

    let mut doc_ids = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = r.u32("doc id length")? as usize;
        doc_ids.push(r.string(len, "doc id")?);
    }
    let n_values = count
        .checked_mul(dim)
        .ok_or_else(|| RetrieverError::Format("size overflow".into()))?;
    let block = r.take(
        n_values
            .checked_mul(8)
            .ok_or_else(|| RetrieverError::Format("size overflow".into()))?,
        "vector block",
    )?;
    if r.pos != buf.len() {
        return Err(RetrieverError::Format(format!(
            "{} trailing bytes",
            buf.len() - r.pos
        )));
    }
    let vectors: Vec<f64> = block
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(RetrieverError::Format("non-finite vector value".into()));
    }
    DenseIndex::from_raw(label, dim, doc_ids, vectors)
}

pub fn write_index(path: impl AsRef<Path>, index: &DenseIndex) -> Result<(), RetrieverError> {
    let path = path.as_ref();
    fs::write(path, encode_index(index)).map_err(|source| RetrieverError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_index(path: impl AsRef<Path>) -> Result<DenseIndex, RetrieverError> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|source| RetrieverError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_index(&buf)
}
