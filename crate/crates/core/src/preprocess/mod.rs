//! Converts a [`CsrGraph`] into the hybrid block/mini graph image.
//!
//! Large vertices (degree above the threshold) are packed into 4 KB blocks by
//! [`partition_lplf`]. Every block left partially filled gets a virtual index
//! entry at its fill boundary, and large plus virtual entries are then
//! renumbered in offset order. This makes `offset(i + 1) - offset(i)` the
//! degree of every real large vertex. Mini vertices follow, sorted by
//! descending degree, with their lists packed into an in-memory region
//! addressed through the [`ThetaTable`].

mod partition;
mod theta;

use std::path::{Path, PathBuf};

pub use partition::{classify, partition_lplf, PartitionPlan, Placement, MAX_BLOCK_VERTICES};
pub use theta::{build_theta, MiniIndex, ThetaTable};

use crate::error::{Error, Result};
use crate::graph::{CsrGraph, VertexId};
use crate::image::{
    encode_u32s, encode_u64s, ImageHeader, BLOCKS_FILE, BLOCK_EDGES, HEADER_FILE, INDEX_FILE,
    MINI_FILE, THETA_FILE, V2ID_FILE, VIRTUAL_FLAG, VIRTUAL_ORIGINAL_ID,
};

const PADDING_EDGE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorderMap {
    /// Original id to reordered id.
    pub new_of_old: Vec<VertexId>,
    /// Reordered id to original id; [`VIRTUAL_ORIGINAL_ID`] for virtual entries.
    pub old_of_new: Vec<VertexId>,
    pub first_mini_id: u64,
}

/// Index entries for the large/virtual id range, with closing sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexIndexImage {
    pub offsets: Vec<u64>,
}

/// A fully built image held in memory, ready to be written.
#[derive(Debug, Clone)]
pub struct BuiltImage {
    pub header: ImageHeader,
    pub placement: Placement,
    pub reorder: ReorderMap,
    pub index: VertexIndexImage,
    pub theta: ThetaTable,
    pub blocks: Vec<u32>,
    pub mini: Vec<u32>,
}

impl BuiltImage {
    pub fn fragmentation_edges(&self) -> u64 {
        self.placement.fragmentation()
    }

    pub fn virtual_count(&self) -> u64 {
        self.index.offsets[..self.index.offsets.len() - 1]
            .iter()
            .filter(|&&o| o & VIRTUAL_FLAG != 0)
            .count() as u64
    }
}

/// Assigns reordered ids to large and virtual entries by offset order.
///
/// `large` lists original ids in the order they were placed; `placement`
/// holds their offsets. Returns the id assignment for large/virtual entries
/// (original id or [`VIRTUAL_ORIGINAL_ID`]) and the index array with its
/// closing sentinel.
pub fn reorder_and_virtualize(
    placement: &Placement,
    large: &[VertexId],
) -> (Vec<VertexId>, VertexIndexImage) {
    debug_assert_eq!(placement.offsets.len(), large.len());
    let cap = BLOCK_EDGES as u64;
    let mut entries: Vec<(u64, VertexId)> = large
        .iter()
        .zip(&placement.offsets)
        .map(|(&v, &o)| (o, v))
        .collect();
    for (b, &fill) in placement.block_fill.iter().enumerate() {
        if (fill as u64) < cap {
            entries.push((b as u64 * cap + fill as u64, VIRTUAL_ORIGINAL_ID));
        }
    }
    entries.sort_unstable_by_key(|e| e.0);
    let mut offsets: Vec<u64> = entries
        .iter()
        .map(|&(o, v)| if v == VIRTUAL_ORIGINAL_ID { o | VIRTUAL_FLAG } else { o })
        .collect();
    offsets.push(placement.block_count() as u64 * cap);
    let ids = entries.into_iter().map(|e| e.1).collect();
    (ids, VertexIndexImage { offsets })
}

/// Runs classification, partitioning, reordering and mini packing.
pub fn build_image(g: &CsrGraph, plan: &PartitionPlan) -> Result<BuiltImage> {
    plan.validate()?;
    let (large, mut mini) = classify(g, plan.degree_threshold);
    let large_degrees: Vec<u64> = large.iter().map(|&v| g.neighbors(v).len() as u64).collect();
    if let Some(&d) = large_degrees.iter().max() {
        if d.div_ceil(BLOCK_EDGES as u64) > u16::MAX as u64 {
            return Err(Error::Range(format!("adjacency list of {d} edges spans too many blocks")));
        }
    }
    let placement = partition_lplf(&large_degrees, plan);
    let (mut old_of_new, index) = reorder_and_virtualize(&placement, &large);

    // Mini ids: descending degree, ties by original id.
    mini.sort_by_key(|&v| (std::cmp::Reverse(g.neighbors(v).len()), v));
    let first_mini_id = old_of_new.len() as u64;
    old_of_new.extend_from_slice(&mini);
    let mini_degrees: Vec<u64> = mini.iter().map(|&v| g.neighbors(v).len() as u64).collect();
    let theta = build_theta(&mini_degrees, first_mini_id, plan.degree_threshold)?;

    let mut new_of_old = vec![VIRTUAL_ORIGINAL_ID; g.num_vertices()];
    for (new, &old) in old_of_new.iter().enumerate() {
        if old != VIRTUAL_ORIGINAL_ID {
            new_of_old[old as usize] = new as VertexId;
        }
    }

    let mut blocks = vec![PADDING_EDGE; placement.block_count() * BLOCK_EDGES];
    for (i, &v) in large.iter().enumerate() {
        let start = placement.offsets[i] as usize;
        for (k, &t) in g.neighbors(v).iter().enumerate() {
            blocks[start + k] = new_of_old[t as usize];
        }
    }
    let mut mini_data = Vec::with_capacity(mini_degrees.iter().sum::<u64>() as usize);
    for &v in &mini {
        mini_data.extend(g.neighbors(v).iter().map(|&t| new_of_old[t as usize]));
    }

    let header = ImageHeader {
        n_original: g.num_vertices() as u64,
        n_reordered: first_mini_id,
        n_mini: mini.len() as u64,
        degree_threshold: plan.degree_threshold,
        block_count: placement.block_count() as u64,
        edge_count: g.num_edges() as u64,
    };
    Ok(BuiltImage {
        header,
        placement,
        reorder: ReorderMap {
            new_of_old,
            old_of_new,
            first_mini_id,
        },
        index,
        theta,
        blocks,
        mini: mini_data,
    })
}

/// Where an image was written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageDescriptor {
    pub dir: PathBuf,
    pub header: ImageHeader,
}

pub fn write_image(image: &BuiltImage, dir: impl AsRef<Path>) -> Result<ImageDescriptor> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    };
    put(HEADER_FILE, &image.header.encode())?;
    put(BLOCKS_FILE, &encode_u32s(&image.blocks))?;
    put(INDEX_FILE, &encode_u64s(&image.index.offsets))?;
    put(THETA_FILE, &encode_u64s(image.theta.bounds()))?;
    put(MINI_FILE, &encode_u32s(&image.mini))?;
    put(V2ID_FILE, &encode_u32s(&image.reorder.old_of_new))?;
    Ok(ImageDescriptor {
        dir: dir.to_path_buf(),
        header: image.header,
    })
}

/// Builds and writes in one step.
pub fn preprocess(g: &CsrGraph, plan: &PartitionPlan, dir: impl AsRef<Path>) -> Result<(BuiltImage, ImageDescriptor)> {
    let built = build_image(g, plan)?;
    let desc = write_image(&built, dir)?;
    Ok((built, desc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_vertex_closes_fragmented_block() {
        let placement = partition_lplf(&[600, 400], &PartitionPlan::default());
        let (ids, index) = reorder_and_virtualize(&placement, &[7, 9]);
        assert_eq!(ids, vec![7, 9, VIRTUAL_ORIGINAL_ID]);
        assert_eq!(index.offsets, vec![0, 600, 1000 | VIRTUAL_FLAG, 1024]);
    }

    #[test]
    fn full_block_has_no_virtual_vertex() {
        let placement = partition_lplf(&[1024], &PartitionPlan::default());
        let (ids, index) = reorder_and_virtualize(&placement, &[3]);
        assert_eq!(ids, vec![3]);
        assert_eq!(index.offsets, vec![0, 1024]);
    }

    #[test]
    fn virtual_follows_last_list_of_block() {
        // Block 0 holds vertex 0 only, block 1 holds 1 and 2; block 0's
        // virtual entry sits between vertex 0 and vertex 1.
        let placement = partition_lplf(&[500, 600, 200], &PartitionPlan::default());
        assert_eq!(placement.block_fill, vec![500, 800]);
        let (ids, _) = reorder_and_virtualize(&placement, &[0, 1, 2]);
        assert_eq!(ids, vec![0, VIRTUAL_ORIGINAL_ID, 1, 2, VIRTUAL_ORIGINAL_ID]);
    }

    #[test]
    fn degree_recovery_from_offsets() {
        let mut edges = Vec::new();
        let degs = [5usize, 700, 3, 1500, 40, 1024, 9];
        let n = 1600;
        for (v, &d) in degs.iter().enumerate() {
            for t in 0..d {
                edges.push((v as u32, ((v + t + 1) % n) as u32));
            }
        }
        let g = CsrGraph::from_edges(n, &edges, false).unwrap();
        let built = build_image(&g, &PartitionPlan::default()).unwrap();
        let off = &built.index.offsets;
        for (new, &old) in built.reorder.old_of_new[..built.header.n_reordered as usize]
            .iter()
            .enumerate()
        {
            if old == VIRTUAL_ORIGINAL_ID {
                continue;
            }
            let deg = (off[new + 1] & !VIRTUAL_FLAG) - (off[new] & !VIRTUAL_FLAG);
            assert_eq!(deg, g.degree(old).unwrap());
        }
        assert_eq!(built.virtual_count(), built.placement.block_fill.iter().filter(|&&f| f < 1024).count() as u64);
    }

    #[test]
    fn path_graph_is_all_mini() {
        let g = CsrGraph::from_edges(3, &[(0, 1), (1, 2)], true).unwrap();
        let built = build_image(&g, &PartitionPlan::default()).unwrap();
        assert_eq!(built.header.block_count, 0);
        assert_eq!(built.header.n_reordered, 0);
        assert_eq!(built.mini.len(), 4);
        // Middle vertex (degree 2) comes first.
        assert_eq!(built.reorder.old_of_new, vec![1, 0, 2]);
    }

    #[test]
    fn empty_graph() {
        let g = CsrGraph::default();
        let dir = tempfile::tempdir().unwrap();
        let (built, desc) = preprocess(&g, &PartitionPlan::default(), dir.path()).unwrap();
        assert_eq!(built.header.block_count, 0);
        assert_eq!(desc.header.n_original, 0);
        assert_eq!(std::fs::metadata(dir.path().join(BLOCKS_FILE)).unwrap().len(), 0);
    }
}
