//! Binary policy checkpoints.
//!
//! Layout (little endian): magic `UADTCKPT`, format version `u32`, vocabulary
//! label and symbol counts, embedding and hidden widths (`u32` each), the
//! parameter block table (name, offset, rows, cols), the parameter count and
//! the raw `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use uadt_core::policy::{ParamLayout, PolicyShape, PolicySnapshot};
use uadt_core::Vocab;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"UADTCKPT";
pub const VERSION: u32 = 1;

pub fn encode(policy: &PolicySnapshot) -> Vec<u8> {
    let shape = policy.shape();
    let mut out = Vec::with_capacity(64 + policy.params().len() * 8);
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        shape.vocab.num_labels() as u32,
        shape.vocab.num_symbols() as u32,
        shape.embed_dim as u32,
        shape.hidden_dim as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let blocks = policy.layout().blocks();
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in blocks {
        out.push(b.name.len() as u8);
        out.extend_from_slice(b.name.as_bytes());
        for v in [b.offset, b.rows, b.cols] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
    }
    out.extend_from_slice(&(policy.params().len() as u64).to_le_bytes());
    for p in policy.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or("truncated checkpoint")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<PolicySnapshot, String> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err("not a checkpoint file".into());
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let labels = c.u32()? as usize;
    let symbols = c.u32()? as usize;
    let embed_dim = c.u32()? as usize;
    let hidden_dim = c.u32()? as usize;
    let vocab = Vocab::new(labels, symbols).map_err(|e| e.to_string())?;
    let shape = PolicyShape { vocab, embed_dim, hidden_dim };
    let expected = ParamLayout::new(&shape).blocks();
    let n_blocks = c.u32()? as usize;
    if n_blocks != expected.len() {
        return Err(format!("expected {} parameter blocks, found {n_blocks}", expected.len()));
    }
    for want in expected {
        let len = c.take(1)?[0] as usize;
        let name = std::str::from_utf8(c.take(len)?).map_err(|_| "bad block name")?;
        let (offset, rows, cols) = (c.u64()?, c.u64()?, c.u64()?);
        if name != want.name || (offset, rows, cols) != (want.offset as u64, want.rows as u64, want.cols as u64) {
            return Err(format!("parameter block {name} does not match the declared shape"));
        }
    }
    let n = c.u64()? as usize;
    let raw = c.take(n.checked_mul(8).ok_or("parameter count overflow")?)?;
    let params = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    if c.pos != bytes.len() {
        return Err("trailing bytes after parameters".into());
    }
    PolicySnapshot::from_params(shape, params).map_err(|e| e.to_string())
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<PolicySnapshot> {
    decode_inner(bytes).map_err(|msg| Error::Format { path: path.to_path_buf(), msg })
}

pub fn save(policy: &PolicySnapshot, path: &Path) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&encode(policy)))
        .map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<PolicySnapshot> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
