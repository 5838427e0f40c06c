//! Locality-preserving last-fit packing of large adjacency lists into blocks.

use crate::error::{Error, Result};
use crate::graph::{CsrGraph, VertexId};
use crate::image::BLOCK_EDGES;

/// Upper bound on vertices packed into one block: the dense frontier bitmap
/// spans 360 ids and the block's virtual vertex (if any) takes one of them.
/// Only reachable with `degree_threshold < 2`.
pub const MAX_BLOCK_VERTICES: u32 = 359;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionPlan {
    /// Number of most recent blocks eligible for placement.
    pub window_size: usize,
    /// Vertices with degree above this are large; the rest are mini.
    pub degree_threshold: u32,
    /// `Some(t)` packs `t` contiguous vertex chunks independently.
    pub parallel_threads: Option<usize>,
}

impl Default for PartitionPlan {
    fn default() -> Self {
        PartitionPlan {
            window_size: 8,
            degree_threshold: 2,
            parallel_threads: None,
        }
    }
}

impl PartitionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::InvalidArgument("window size must be at least 1".into()));
        }
        if self.degree_threshold > 3 {
            return Err(Error::InvalidArgument(format!(
                "degree threshold {} outside 0..=3",
                self.degree_threshold
            )));
        }
        if self.parallel_threads == Some(0) {
            return Err(Error::InvalidArgument("parallel threads must be positive".into()));
        }
        Ok(())
    }
}

/// Splits vertices into (large, mini), each in ascending original id order.
pub fn classify(g: &CsrGraph, degree_threshold: u32) -> (Vec<VertexId>, Vec<VertexId>) {
    let mut large = Vec::new();
    let mut mini = Vec::new();
    for (v, d) in g.degrees().enumerate() {
        if d > degree_threshold as u64 {
            large.push(v as VertexId);
        } else {
            mini.push(v as VertexId);
        }
    }
    (large, mini)
}

/// Where each large vertex's list lives. Offsets are in edge units from the
/// start of the block region; block `b` starts at edge `1024 * b`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Placement {
    /// Edge offset per placed vertex, in input order.
    pub offsets: Vec<u64>,
    /// Edges used in each physical block.
    pub block_fill: Vec<u32>,
    /// Real vertices packed into each block (a spanning list counts in its first block).
    pub block_vertices: Vec<u32>,
    /// Blocks owned by a list longer than one block, as `(first_block, pages)`.
    pub spans: Vec<(u64, u64)>,
}

impl Placement {
    pub fn block_count(&self) -> usize {
        self.block_fill.len()
    }

    pub fn block_of(&self, i: usize) -> u64 {
        self.offsets[i] / BLOCK_EDGES as u64
    }

    pub fn slot_of(&self, i: usize) -> u64 {
        self.offsets[i] % BLOCK_EDGES as u64
    }

    /// Unused edge slots summed over all blocks.
    pub fn fragmentation(&self) -> u64 {
        self.block_fill
            .iter()
            .map(|&f| (BLOCK_EDGES as u32 - f) as u64)
            .sum()
    }

    fn append(&mut self, mut other: Placement) {
        let shift = self.block_count() as u64;
        let edge_shift = shift * BLOCK_EDGES as u64;
        self.offsets
            .extend(other.offsets.iter().map(|o| o + edge_shift));
        self.block_fill.append(&mut other.block_fill);
        self.block_vertices.append(&mut other.block_vertices);
        self.spans
            .extend(other.spans.iter().map(|&(b, p)| (b + shift, p)));
    }
}

/// Packs lists of the given degrees in order. Each list of at most 1024 edges
/// goes to the rightmost block among the last `window_size` blocks that has
/// room, or to a fresh block. Longer lists get a dedicated run of consecutive
/// blocks that never takes part in window placement.
pub fn partition_lplf(degrees: &[u64], plan: &PartitionPlan) -> Placement {
    match plan.parallel_threads {
        Some(t) if t > 1 && degrees.len() > 1 => {
            let chunk = degrees.len().div_ceil(t);
            let parts: Vec<Placement> = std::thread::scope(|s| {
                let handles: Vec<_> = degrees
                    .chunks(chunk)
                    .map(|c| s.spawn(move || pack(c, plan.window_size)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            let mut out = Placement::default();
            for p in parts {
                out.append(p);
            }
            out
        }
        _ => pack(degrees, plan.window_size),
    }
}

fn pack(degrees: &[u64], window: usize) -> Placement {
    let cap = BLOCK_EDGES as u64;
    let mut p = Placement {
        offsets: Vec::with_capacity(degrees.len()),
        ..Placement::default()
    };
    let mut dedicated: Vec<bool> = Vec::new();
    for &deg in degrees {
        let nb = p.block_fill.len();
        if deg > cap {
            let pages = deg.div_ceil(cap);
            p.offsets.push(nb as u64 * cap);
            p.spans.push((nb as u64, pages));
            let mut left = deg;
            for i in 0..pages {
                let fill = left.min(cap);
                left -= fill;
                p.block_fill.push(fill as u32);
                p.block_vertices.push(u32::from(i == 0));
                dedicated.push(true);
            }
            continue;
        }
        let lo = nb.saturating_sub(window);
        let target = (lo..nb).rev().find(|&b| {
            !dedicated[b]
                && p.block_vertices[b] < MAX_BLOCK_VERTICES
                && cap - p.block_fill[b] as u64 >= deg
        });
        let b = target.unwrap_or_else(|| {
            p.block_fill.push(0);
            p.block_vertices.push(0);
            dedicated.push(false);
            nb
        });
        p.offsets.push(b as u64 * cap + p.block_fill[b] as u64);
        p.block_fill[b] += deg as u32;
        p.block_vertices[b] += 1;
    }
    p
}
