//! `SRTG` graph files.
//!
//! Layout, all little-endian: magic `SRTG`, version byte `0x01`, `u64` item
//! count `n`, `u64` edge count `m`, `n + 1` `u64` row offsets, `m` `u32`
//! targets, `m` `u32` counts.

use std::fs;
use std::path::Path;

use super::TransitionGraph;
use crate::error::{Error, Result};

pub const SRTG_MAGIC: &[u8; 4] = b"SRTG";
pub const SRTG_VERSION: u8 = 0x01;

pub fn encode_graph(g: &TransitionGraph) -> Vec<u8> {
    let (offsets, targets, counts) = g.raw_parts();
    let mut buf = Vec::with_capacity(21 + 8 * offsets.len() + 8 * targets.len());
    buf.extend_from_slice(SRTG_MAGIC);
    buf.push(SRTG_VERSION);
    buf.extend_from_slice(&(g.num_items() as u64).to_le_bytes());
    buf.extend_from_slice(&(targets.len() as u64).to_le_bytes());
    for &o in offsets {
        buf.extend_from_slice(&(o as u64).to_le_bytes());
    }
    for &t in targets {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    for &c in counts {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    buf
}

pub fn write_graph(path: impl AsRef<Path>, g: &TransitionGraph) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_graph(g)).map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<TransitionGraph> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_graph(&bytes, path)
}

pub fn decode_graph(bytes: &[u8], path: &Path) -> Result<TransitionGraph> {
    let fail = |offset: usize, message: String| Error::BadBinary {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if bytes.len() - pos < n {
            return Err(fail(pos, format!("truncated while reading {what}")));
        }
        pos += n;
        Ok(&bytes[pos - n..pos])
    };
    if take(4, "magic")? != SRTG_MAGIC {
        return Err(fail(0, "bad magic, expected SRTG".into()));
    }
    let version = take(1, "version")?[0];
    if version != SRTG_VERSION {
        return Err(fail(4, format!("unsupported version {version:#04x}")));
    }
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().expect("8 bytes"));
    let n = u64_at(take(8, "item count")?) as usize;
    let m = u64_at(take(8, "edge count")?) as usize;
    let header = 21;
    let expected = n
        .checked_add(1)
        .and_then(|x| x.checked_mul(8))
        .and_then(|x| m.checked_mul(8).and_then(|y| x.checked_add(y)))
        .and_then(|x| x.checked_add(header));
    if expected != Some(bytes.len()) {
        return Err(fail(
            header,
            format!("file length {} does not match {n} items and {m} edges", bytes.len()),
        ));
    }
    let offsets: Vec<usize> = bytes[header..header + 8 * (n + 1)]
        .chunks_exact(8)
        .map(|c| u64_at(c) as usize)
        .collect();
    let t0 = header + 8 * (n + 1);
    let targets: Vec<u32> = bytes[t0..t0 + 4 * m]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let counts: Vec<u32> = bytes[t0 + 4 * m..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();

    if offsets[0] != 0 || offsets[n] != m || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(fail(header, "row offsets are not a valid CSR index".into()));
    }
    for i in 0..n {
        let row = &targets[offsets[i]..offsets[i + 1]];
        if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&t| t as usize >= n) {
            return Err(fail(t0 + 4 * offsets[i], format!("row {i} targets unsorted or out of range")));
        }
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(fail(t0 + 4 * m + 4 * k, "zero transition count".into()));
    }
    Ok(TransitionGraph::from_csr(n, offsets, targets, counts))
}
