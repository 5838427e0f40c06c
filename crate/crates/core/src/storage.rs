//! Read side of a graph image.
//!
//! The index, theta table and mini region are loaded into memory; block
//! pages stay on disk and are supplied by the caller (the runtime's buffer
//! pool) when a large vertex's neighbors are needed. No degree is stored
//! anywhere: large degrees come from offset differences, mini degrees from
//! the theta table.

use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::image::{
    decode_u32s, decode_u64s, read_file, ImageHeader, BLOCKS_FILE, BLOCK_EDGES, HEADER_FILE,
    INDEX_FILE, MINI_FILE, PAGE_BYTES, THETA_FILE, V2ID_FILE, VIRTUAL_FLAG, VIRTUAL_ORIGINAL_ID,
};
use crate::preprocess::{MiniIndex, ThetaTable};

/// One 4 KB block of edges, aligned for direct I/O.
#[repr(C, align(4096))]
#[derive(Clone, Copy)]
pub struct Page(pub [u32; BLOCK_EDGES]);

const _: () = assert!(std::mem::size_of::<Page>() == PAGE_BYTES);

impl Page {
    pub const fn zeroed() -> Self {
        Page([0; BLOCK_EDGES])
    }
}

impl std::fmt::Debug for Page {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Page([{}, ..])", self.0[0])
    }
}

pub fn pages_as_edges(pages: &[Page]) -> &[u32] {
    // SAFETY: Page is repr(C) over [u32; 1024] with size 4096 and no padding,
    // so a slice of pages is a contiguous run of u32.
    unsafe { std::slice::from_raw_parts(pages.as_ptr().cast::<u32>(), pages.len() * BLOCK_EDGES) }
}

pub fn pages_as_bytes_mut(pages: &mut [Page]) -> &mut [u8] {
    // SAFETY: as above; every byte pattern is a valid u32.
    unsafe { std::slice::from_raw_parts_mut(pages.as_mut_ptr().cast::<u8>(), pages.len() * PAGE_BYTES) }
}

/// Converts freshly read little-endian pages to host order.
pub fn fix_endianness(pages: &mut [Page]) {
    if cfg!(target_endian = "big") {
        for p in pages {
            for x in p.0.iter_mut() {
                *x = u32::from_le(*x);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockRef {
    pub block_id: u32,
    pub page_count: u16,
}

/// Caller-provided page memory starting at `first_block`.
#[derive(Debug, Clone, Copy)]
pub struct PageRun<'a> {
    pub first_block: u32,
    pub pages: &'a [Page],
}

#[derive(Debug)]
pub struct OpenImage {
    dir: PathBuf,
    header: ImageHeader,
    index: Vec<u64>,
    mini_index: MiniIndex,
    mini: Vec<u32>,
    blocks: File,
    /// Pages in the run headed by each block; 0 for the tail blocks of a run.
    block_pages: Vec<u16>,
    /// Smallest reordered id whose index offset falls in each block.
    block_first_id: Vec<u32>,
}

impl OpenImage {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let header = ImageHeader::decode(&read_file(&dir, HEADER_FILE)?)?;
        if header.n_total() > u32::MAX as u64 {
            return Err(Error::Format("too many vertices for 32-bit ids".into()));
        }
        let index = decode_u64s(&read_file(&dir, INDEX_FILE)?, INDEX_FILE)?;
        if index.len() as u64 != header.n_reordered + 1 {
            return Err(Error::Format(format!(
                "index has {} entries, expected {}",
                index.len(),
                header.n_reordered + 1
            )));
        }
        let theta = ThetaTable::from_bounds(
            decode_u64s(&read_file(&dir, THETA_FILE)?, THETA_FILE)?,
            header.n_total(),
        )?;
        if theta.degree_threshold() != header.degree_threshold
            || theta.first_mini_id() != header.n_reordered
            || theta.end_id() != header.n_total()
        {
            return Err(Error::Format("theta table inconsistent with header".into()));
        }
        let mini_index = MiniIndex::new(theta);
        let mini = decode_u32s(&read_file(&dir, MINI_FILE)?, MINI_FILE)?;
        if mini.len() as u64 != mini_index.total_edges() {
            return Err(Error::Format("mini region size does not match theta table".into()));
        }
        let blocks_path = dir.join(BLOCKS_FILE);
        let blocks = File::open(&blocks_path).map_err(|e| Error::io(&blocks_path, e))?;
        let len = blocks.metadata().map_err(|e| Error::io(&blocks_path, e))?.len();
        if len != header.block_count * PAGE_BYTES as u64 {
            return Err(Error::Format(format!(
                "{BLOCKS_FILE} is {len} bytes, expected {} blocks",
                header.block_count
            )));
        }
        let v2id_path = dir.join(V2ID_FILE);
        let v2id_len = std::fs::metadata(&v2id_path).map_err(|e| Error::io(&v2id_path, e))?.len();
        if v2id_len != header.n_total() * 4 {
            return Err(Error::Format(format!("{V2ID_FILE} is {v2id_len} bytes, expected {}", header.n_total() * 4)));
        }
        let masked = |o: u64| o & !VIRTUAL_FLAG;
        if masked(index[header.n_reordered as usize]) != header.block_count * BLOCK_EDGES as u64
            || index.windows(2).any(|w| masked(w[0]) >= masked(w[1]))
        {
            return Err(Error::Format("index offsets not strictly increasing".into()));
        }

        let cap = BLOCK_EDGES as u64;
        let nb = header.block_count as usize;
        let mut block_pages = vec![0u16; nb];
        let mut block_first_id = vec![u32::MAX; nb];
        for i in 0..header.n_reordered as usize {
            let off = masked(index[i]);
            let b = (off / cap) as usize;
            if block_first_id[b] == u32::MAX {
                block_first_id[b] = i as u32;
            }
            if index[i] & VIRTUAL_FLAG == 0 {
                let deg = masked(index[i + 1]) - off;
                let pages = deg.div_ceil(cap).max(1) as u16;
                block_pages[b] = block_pages[b].max(pages);
            }
        }

        Ok(OpenImage {
            dir,
            header,
            index,
            mini_index,
            mini,
            blocks,
            block_pages,
            block_first_id,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn header(&self) -> &ImageHeader {
        &self.header
    }

    pub fn theta(&self) -> &ThetaTable {
        self.mini_index.theta()
    }

    pub fn mini_index(&self) -> &MiniIndex {
        &self.mini_index
    }

    pub fn block_count(&self) -> u32 {
        self.header.block_count as u32
    }

    pub fn n_reordered(&self) -> u32 {
        self.header.n_reordered as u32
    }

    pub fn n_total(&self) -> u32 {
        self.header.n_total() as u32
    }

    pub fn first_mini_id(&self) -> u32 {
        self.header.n_reordered as u32
    }

    pub fn is_mini(&self, v: VertexId) -> bool {
        v >= self.first_mini_id() && v < self.n_total()
    }

    pub fn is_virtual(&self, v: VertexId) -> Result<bool> {
        if v >= self.n_total() {
            return Err(Error::Range(format!("vertex {v} outside [0, {})", self.n_total())));
        }
        Ok(v < self.n_reordered() && self.index[v as usize] & VIRTUAL_FLAG != 0)
    }

    /// Unchecked variant for hot paths; `v` must be in range.
    #[inline]
    pub fn is_virtual_unchecked(&self, v: VertexId) -> bool {
        v < self.n_reordered() && self.index[v as usize] & VIRTUAL_FLAG != 0
    }

    #[inline]
    fn offset(&self, v: VertexId) -> u64 {
        self.index[v as usize] & !VIRTUAL_FLAG
    }

    pub fn degree_of(&self, v: VertexId) -> Result<u64> {
        if self.is_virtual(v)? {
            return Err(Error::Contract(format!("vertex {v} is virtual")));
        }
        if v < self.n_reordered() {
            Ok(self.offset(v + 1) - self.offset(v))
        } else {
            self.mini_index.degree(v as u64)
        }
    }

    pub fn mini_offset(&self, v: VertexId) -> Result<u64> {
        if !self.is_mini(v) {
            return Err(Error::Contract(format!("vertex {v} is not a mini vertex")));
        }
        self.mini_index.offset(v as u64)
    }

    pub fn block_of(&self, v: VertexId) -> Result<BlockRef> {
        if v >= self.n_reordered() || self.is_virtual(v)? {
            return Err(Error::Contract(format!("vertex {v} is not a real large vertex")));
        }
        let off = self.offset(v);
        let deg = self.offset(v + 1) - off;
        let cap = BLOCK_EDGES as u64;
        Ok(BlockRef {
            block_id: (off / cap) as u32,
            page_count: deg.div_ceil(cap).max(1) as u16,
        })
    }

    /// Scheduling block of a large id (real or virtual), without checks.
    #[inline]
    pub fn block_id_unchecked(&self, v: VertexId) -> u32 {
        (self.offset(v) / BLOCK_EDGES as u64) as u32
    }

    /// Page count of the run headed by `block`; 0 if `block` is the tail of
    /// another block's run.
    pub fn block_pages(&self, block: u32) -> u16 {
        self.block_pages[block as usize]
    }

    /// Smallest reordered id belonging to `block`.
    pub fn block_first_id(&self, block: u32) -> u32 {
        self.block_first_id[block as usize]
    }

    pub fn block_ref(&self, block: u32) -> BlockRef {
        BlockRef {
            block_id: block,
            page_count: self.block_pages[block as usize],
        }
    }

    /// Adjacency of `v` in reordered id space. Large vertices need the page
    /// run covering their block.
    pub fn neighbors<'a>(&'a self, v: VertexId, data: Option<PageRun<'a>>) -> Result<&'a [u32]> {
        if self.is_virtual(v)? {
            return Err(Error::Contract(format!("vertex {v} is virtual")));
        }
        if v >= self.n_reordered() {
            let off = self.mini_index.offset(v as u64)? as usize;
            let deg = self.mini_index.degree(v as u64)? as usize;
            return Ok(&self.mini[off..off + deg]);
        }
        let run = self.block_of(v)?;
        let Some(data) = data else {
            return Err(Error::Contract(format!("large vertex {v} needs block data")));
        };
        if data.first_block != run.block_id || data.pages.len() < run.page_count as usize {
            return Err(Error::Contract(format!(
                "vertex {v} lives in block {} ({} pages), got block {} ({} pages)",
                run.block_id,
                run.page_count,
                data.first_block,
                data.pages.len()
            )));
        }
        let start = (self.offset(v) % BLOCK_EDGES as u64) as usize;
        let deg = (self.offset(v + 1) - self.offset(v)) as usize;
        Ok(&pages_as_edges(data.pages)[start..start + deg])
    }

    /// Synchronous read of `pages.len()` pages starting at `block`.
    pub fn read_pages(&self, block: u32, pages: &mut [Page]) -> Result<()> {
        read_pages_at(&self.blocks, block, pages).map_err(|e| Error::io(self.blocks_path(), e))
    }

    pub fn blocks_path(&self) -> PathBuf {
        self.dir.join(BLOCKS_FILE)
    }

    /// Reordered-to-original id table, read from disk on demand.
    pub fn load_v2id(&self) -> Result<Vec<u32>> {
        let v2id = decode_u32s(&read_file(&self.dir, V2ID_FILE)?, V2ID_FILE)?;
        if v2id.len() as u64 != self.header.n_total() {
            return Err(Error::Format("v2id length does not match header".into()));
        }
        Ok(v2id)
    }

    pub fn id_map(&self) -> Result<IdMap> {
        IdMap::new(self.load_v2id()?, self.header.n_original as usize)
    }
}

pub(crate) fn read_pages_at(file: &File, block: u32, pages: &mut [Page]) -> std::io::Result<()> {
    file.read_exact_at(pages_as_bytes_mut(pages), block as u64 * PAGE_BYTES as u64)?;
    fix_endianness(pages);
    Ok(())
}

/// Translation between original and reordered ids.
#[derive(Debug, Clone)]
pub struct IdMap {
    old_of_new: Vec<u32>,
    new_of_old: Vec<u32>,
}

impl IdMap {
    pub fn new(old_of_new: Vec<u32>, n_original: usize) -> Result<Self> {
        let mut new_of_old = vec![u32::MAX; n_original];
        for (new, &old) in old_of_new.iter().enumerate() {
            if old == VIRTUAL_ORIGINAL_ID {
                continue;
            }
            let slot = new_of_old
                .get_mut(old as usize)
                .ok_or_else(|| Error::Format(format!("original id {old} out of range")))?;
            if *slot != u32::MAX {
                return Err(Error::Format(format!("original id {old} mapped twice")));
            }
            *slot = new as u32;
        }
        if new_of_old.contains(&u32::MAX) {
            return Err(Error::Format("v2id is not a bijection".into()));
        }
        Ok(IdMap {
            old_of_new,
            new_of_old,
        })
    }

    pub fn n_original(&self) -> usize {
        self.new_of_old.len()
    }

    pub fn to_reordered(&self, original: u32) -> Result<VertexId> {
        self.new_of_old
            .get(original as usize)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("vertex {original} not in graph")))
    }

    /// `None` for virtual ids.
    pub fn to_original(&self, reordered: VertexId) -> Option<u32> {
        match self.old_of_new.get(reordered as usize) {
            Some(&o) if o != VIRTUAL_ORIGINAL_ID => Some(o),
            _ => None,
        }
    }

    pub fn new_of_old(&self) -> &[u32] {
        &self.new_of_old
    }

    pub fn old_of_new(&self) -> &[u32] {
        &self.old_of_new
    }

    /// Reorders a per-reordered-id array into original id order.
    pub fn gather<T: Copy>(&self, by_reordered: &[T]) -> Vec<T> {
        self.new_of_old.iter().map(|&n| by_reordered[n as usize]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CsrGraph;
    use crate::preprocess::{preprocess, PartitionPlan};

    fn fan(degs: &[usize], n: usize) -> CsrGraph {
        let mut edges = Vec::new();
        for (v, &d) in degs.iter().enumerate() {
            for t in 0..d {
                edges.push((v as u32, ((v + 1 + t) % n) as u32));
            }
        }
        CsrGraph::from_edges(n, &edges, false).unwrap()
    }

    fn read_run(img: &OpenImage, r: BlockRef) -> Vec<Page> {
        let mut pages = vec![Page::zeroed(); r.page_count as usize];
        img.read_pages(r.block_id, &mut pages).unwrap();
        pages
    }

    #[test]
    fn lone_vertex_block_and_virtual_flag() {
        let g = fan(&[10], 20);
        let dir = tempfile::tempdir().unwrap();
        preprocess(&g, &PartitionPlan::default(), dir.path()).unwrap();
        let img = OpenImage::open(dir.path()).unwrap();
        assert_eq!(img.n_reordered(), 2);
        assert!(!img.is_virtual(0).unwrap());
        assert!(img.is_virtual(1).unwrap());
        assert!(img.is_virtual(99).is_err());
        assert_eq!(img.block_of(0).unwrap(), BlockRef { block_id: 0, page_count: 1 });
        let pages = read_run(&img, img.block_of(0).unwrap());
        let run = PageRun { first_block: 0, pages: &pages };
        let nb = img.neighbors(0, Some(run)).unwrap();
        assert_eq!(nb, &pages[0].0[..10]);
        assert!(matches!(img.degree_of(1), Err(Error::Contract(_))));
        assert!(matches!(img.neighbors(0, None), Err(Error::Contract(_))));
        // A degree-0 mini vertex.
        let last = img.n_total() - 1;
        assert_eq!(img.degree_of(last).unwrap(), 0);
        assert!(img.neighbors(last, None).unwrap().is_empty());
    }

    #[test]
    fn spanning_vertex_ref() {
        let g = fan(&[5, 2048], 2100);
        let dir = tempfile::tempdir().unwrap();
        preprocess(&g, &PartitionPlan::default(), dir.path()).unwrap();
        let img = OpenImage::open(dir.path()).unwrap();
        // Vertex 0 (deg 5) in block 0, its virtual entry, then the span at block 1.
        assert_eq!(img.block_of(2).unwrap(), BlockRef { block_id: 1, page_count: 2 });
        assert_eq!(img.block_pages(1), 2);
        assert_eq!(img.block_pages(2), 0);
        let pages = read_run(&img, img.block_ref(1));
        let nb = img.neighbors(2, Some(PageRun { first_block: 1, pages: &pages })).unwrap();
        assert_eq!(nb.len(), 2048);
        let short = &pages[..1];
        assert!(img.neighbors(2, Some(PageRun { first_block: 1, pages: short })).is_err());
        assert!(img.neighbors(2, Some(PageRun { first_block: 0, pages: &pages })).is_err());
    }

    #[test]
    fn corrupt_image_rejected() {
        let g = fan(&[10, 3], 20);
        let dir = tempfile::tempdir().unwrap();
        preprocess(&g, &PartitionPlan::default(), dir.path()).unwrap();
        std::fs::write(dir.path().join(MINI_FILE), [0u8; 4]).unwrap();
        assert!(matches!(OpenImage::open(dir.path()), Err(Error::Format(_))));
        assert!(matches!(OpenImage::open(dir.path().join("nope")), Err(Error::Io { .. })));
    }
}
