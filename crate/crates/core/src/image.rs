//! On-disk layout of a graph image directory. All integers little-endian.
//!
//! | file         | contents                                              |
//! |--------------|-------------------------------------------------------|
//! | `header`     | magic `ACG1`, version, counts                         |
//! | `blocks.bin` | `block_count` pages of 1024 `u32` reordered targets   |
//! | `index.bin`  | `n_reordered + 1` `u64` edge offsets, bit 63 = virtual |
//! | `theta.bin`  | `degree_threshold + 1` `u64` id boundaries            |
//! | `mini.bin`   | packed `u32` targets of mini vertices                 |
//! | `v2id.bin`   | `n_total` `u32` original ids, `u32::MAX` for virtual  |

use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: &[u8; 4] = b"ACG1";
pub const IMAGE_VERSION: u32 = 1;

pub const PAGE_BYTES: usize = 4096;
/// Edges per 4 KB block.
pub const BLOCK_EDGES: usize = PAGE_BYTES / 4;
pub const VIRTUAL_FLAG: u64 = 1 << 63;
pub const VIRTUAL_ORIGINAL_ID: u32 = u32::MAX;

pub const HEADER_FILE: &str = "header";
pub const BLOCKS_FILE: &str = "blocks.bin";
pub const INDEX_FILE: &str = "index.bin";
pub const THETA_FILE: &str = "theta.bin";
pub const MINI_FILE: &str = "mini.bin";
pub const V2ID_FILE: &str = "v2id.bin";

pub const HEADER_BYTES: usize = 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageHeader {
    pub n_original: u64,
    /// Large plus virtual vertices; these take reordered ids `[0, n_reordered)`.
    pub n_reordered: u64,
    pub n_mini: u64,
    pub degree_threshold: u32,
    pub block_count: u64,
    pub edge_count: u64,
}

impl ImageHeader {
    pub fn n_total(&self) -> u64 {
        self.n_reordered + self.n_mini
    }

    pub fn encode(&self) -> [u8; HEADER_BYTES] {
        let mut out = [0u8; HEADER_BYTES];
        let mut w = Writer(&mut out, 0);
        w.put(IMAGE_MAGIC);
        w.put(&IMAGE_VERSION.to_le_bytes());
        w.put(&self.n_original.to_le_bytes());
        w.put(&self.n_reordered.to_le_bytes());
        w.put(&self.n_mini.to_le_bytes());
        w.put(&self.degree_threshold.to_le_bytes());
        w.put(&self.block_count.to_le_bytes());
        w.put(&self.edge_count.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != HEADER_BYTES {
            return Err(Error::Format(format!(
                "header is {} bytes, expected {HEADER_BYTES}",
                bytes.len()
            )));
        }
        if &bytes[..4] != IMAGE_MAGIC {
            return Err(Error::Format("bad header magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != IMAGE_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(ImageHeader {
            n_original: u64_at(8),
            n_reordered: u64_at(16),
            n_mini: u64_at(24),
            degree_threshold: u32_at(32),
            block_count: u64_at(36),
            edge_count: u64_at(44),
        })
    }
}

struct Writer<'a>(&'a mut [u8], usize);

impl Writer<'_> {
    fn put(&mut self, b: &[u8]) {
        self.0[self.1..self.1 + b.len()].copy_from_slice(b);
        self.1 += b.len();
    }
}

pub(crate) fn read_file(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let path = dir.join(name);
    std::fs::read(&path).map_err(|e| Error::io(path, e))
}

pub(crate) fn decode_u64s(bytes: &[u8], what: &str) -> Result<Vec<u64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!("{what} length not a multiple of 8")));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn decode_u32s(bytes: &[u8], what: &str) -> Result<Vec<u32>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::Format(format!("{what} length not a multiple of 4")));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn encode_u64s(values: &[u64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn encode_u32s(values: &[u32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let h = ImageHeader {
            n_original: 7,
            n_reordered: 3,
            n_mini: 5,
            degree_threshold: 2,
            block_count: 1,
            edge_count: 42,
        };
        assert_eq!(ImageHeader::decode(&h.encode()).unwrap(), h);
        let mut bad = h.encode();
        bad[0] = 0;
        assert!(ImageHeader::decode(&bad).is_err());
    }
}
