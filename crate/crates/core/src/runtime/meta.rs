//! Per-block scheduling metadata, packed into one 64-byte cache line.
//!
//! ```text
//! offset  size  field
//!      0     8  data_ref   bit 0: spin lock, bits 1..64: buffer handle + 1
//!      8     4  priority   aggregated frontier priority
//!     12    51  afs        v_start (4) | count (2) | payload (45)
//!     63     1  state      BlockState
//! ```
//!
//! All fields other than `data_ref`'s lock bit are mutated only while the lock
//! bit is held.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicI32, AtomicU64, AtomicU8, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::VertexId;

/// Ids held inline before the frontier switches to a bitmap.
pub const SPARSE_CAPACITY: usize = 45 / 4;
/// Bits in the dense bitmap; ids in `[v_start, v_start + DENSE_SPAN)`.
pub const DENSE_SPAN: u32 = 45 * 8;

#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockState {
    Inactive = 0,
    Uncached = 1,
    Cached = 2,
    Processing = 3,
    Reactivated = 4,
}

impl BlockState {
    fn from_u8(x: u8) -> Self {
        match x {
            0 => BlockState::Inactive,
            1 => BlockState::Uncached,
            2 => BlockState::Cached,
            3 => BlockState::Processing,
            4 => BlockState::Reactivated,
            _ => unreachable!("corrupt block state {x}"),
        }
    }

    /// Edges of the block state machine, plus the early-stop eviction edge
    /// `Cached -> Uncached`.
    pub fn is_legal(from: BlockState, to: BlockState) -> bool {
        use BlockState::*;
        matches!(
            (from, to),
            (Inactive, Uncached)
                | (Uncached, Cached)
                | (Cached, Processing)
                | (Processing, Reactivated)
                | (Processing, Inactive)
                | (Reactivated, Cached)
                | (Cached, Uncached)
        )
    }
}

/// Adaptive frontier set: up to 11 ids stored inline, a 360-bit bitmap
/// relative to `v_start` beyond that.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct Afs {
    v_start: [u8; 4],
    count: [u8; 2],
    payload: [u8; 45],
}

const _: () = assert!(std::mem::size_of::<Afs>() == 51);

impl std::fmt::Debug for Afs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Afs")
            .field("v_start", &self.v_start())
            .field("members", &self.members())
            .finish()
    }
}

impl Afs {
    pub fn new(v_start: VertexId) -> Self {
        Afs {
            v_start: v_start.to_le_bytes(),
            count: [0; 2],
            payload: [0; 45],
        }
    }

    pub fn v_start(&self) -> VertexId {
        u32::from_le_bytes(self.v_start)
    }

    pub fn len(&self) -> usize {
        u16::from_le_bytes(self.count) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_dense(&self) -> bool {
        self.len() > SPARSE_CAPACITY
    }

    fn set_len(&mut self, n: usize) {
        self.count = (n as u16).to_le_bytes();
    }

    fn sparse_get(&self, i: usize) -> VertexId {
        u32::from_le_bytes(self.payload[i * 4..i * 4 + 4].try_into().unwrap())
    }

    fn sparse_put(&mut self, i: usize, v: VertexId) {
        self.payload[i * 4..i * 4 + 4].copy_from_slice(&v.to_le_bytes());
    }

    fn bit(&self, rel: u32) -> bool {
        self.payload[(rel / 8) as usize] & (1 << (rel % 8)) != 0
    }

    fn set_bit(&mut self, rel: u32) {
        self.payload[(rel / 8) as usize] |= 1 << (rel % 8);
    }

    fn relative(&self, v: VertexId) -> Result<u32> {
        v.checked_sub(self.v_start())
            .filter(|&r| r < DENSE_SPAN)
            .ok_or_else(|| {
                Error::Invariant(format!(
                    "vertex {v} outside frontier range [{}, {})",
                    self.v_start(),
                    self.v_start() as u64 + DENSE_SPAN as u64
                ))
            })
    }

    pub fn contains(&self, v: VertexId) -> bool {
        let Ok(rel) = self.relative(v) else {
            return false;
        };
        if self.is_dense() {
            self.bit(rel)
        } else {
            (0..self.len()).any(|i| self.sparse_get(i) == v)
        }
    }

    /// Adds `v`; returns whether it was new.
    pub fn insert(&mut self, v: VertexId) -> Result<bool> {
        let rel = self.relative(v)?;
        let n = self.len();
        if self.is_dense() {
            if self.bit(rel) {
                return Ok(false);
            }
            self.set_bit(rel);
            self.set_len(n + 1);
            return Ok(true);
        }
        if (0..n).any(|i| self.sparse_get(i) == v) {
            return Ok(false);
        }
        if n < SPARSE_CAPACITY {
            self.sparse_put(n, v);
            self.set_len(n + 1);
            return Ok(true);
        }
        let members: Vec<VertexId> = (0..n).map(|i| self.sparse_get(i)).collect();
        self.payload = [0; 45];
        let start = self.v_start();
        for m in members.into_iter().chain([v]) {
            self.set_bit(m - start);
        }
        self.set_len(n + 1);
        Ok(true)
    }

    /// Members in ascending order.
    pub fn members(&self) -> Vec<VertexId> {
        if self.is_dense() {
            let start = self.v_start();
            (0..DENSE_SPAN)
                .filter(|&r| self.bit(r))
                .map(|r| start + r)
                .collect()
        } else {
            let mut m: Vec<VertexId> = (0..self.len()).map(|i| self.sparse_get(i)).collect();
            m.sort_unstable();
            m
        }
    }

    /// Empties the set, returning its members in ascending order.
    pub fn drain(&mut self) -> Vec<VertexId> {
        let m = self.members();
        self.payload = [0; 45];
        self.set_len(0);
        m
    }
}

#[repr(C, align(64))]
pub struct BlockMeta {
    data_ref: AtomicU64,
    priority: AtomicI32,
    afs: UnsafeCell<Afs>,
    state: AtomicU8,
}

const _: () = assert!(std::mem::size_of::<BlockMeta>() == 64);
const _: () = assert!(std::mem::align_of::<BlockMeta>() == 64);

// SAFETY: `afs` is only accessed through a `MetaGuard`, which holds the lock bit.
unsafe impl Sync for BlockMeta {}

const LOCK_BIT: u64 = 1;

impl BlockMeta {
    pub fn new(v_start: VertexId, neutral_priority: i32) -> Self {
        BlockMeta {
            data_ref: AtomicU64::new(0),
            priority: AtomicI32::new(neutral_priority),
            afs: UnsafeCell::new(Afs::new(v_start)),
            state: AtomicU8::new(BlockState::Inactive as u8),
        }
    }

    /// Unsynchronized peek; validate under the lock before acting on it.
    pub fn state_hint(&self) -> BlockState {
        BlockState::from_u8(self.state.load(Ordering::Relaxed))
    }

    pub fn lock(&self) -> MetaGuard<'_> {
        let mut spins = 0u32;
        loop {
            let cur = self.data_ref.load(Ordering::Relaxed);
            if cur & LOCK_BIT == 0
                && self
                    .data_ref
                    .compare_exchange_weak(cur, cur | LOCK_BIT, Ordering::Acquire, Ordering::Relaxed)
                    .is_ok()
            {
                return MetaGuard { meta: self };
            }
            spins += 1;
            if spins < 64 {
                std::hint::spin_loop();
            } else {
                std::thread::yield_now();
            }
        }
    }
}

impl std::fmt::Debug for BlockMeta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockMeta")
            .field("state", &self.state_hint())
            .field("priority", &self.priority.load(Ordering::Relaxed))
            .finish()
    }
}

pub struct MetaGuard<'a> {
    meta: &'a BlockMeta,
}

impl MetaGuard<'_> {
    pub fn state(&self) -> BlockState {
        BlockState::from_u8(self.meta.state.load(Ordering::Relaxed))
    }

    pub fn set_state(&mut self, s: BlockState) {
        self.meta.state.store(s as u8, Ordering::Relaxed);
    }

    pub fn priority(&self) -> i32 {
        self.meta.priority.load(Ordering::Relaxed)
    }

    pub fn set_priority(&mut self, p: i32) {
        self.meta.priority.store(p, Ordering::Relaxed);
    }

    pub fn afs(&self) -> &Afs {
        // SAFETY: lock held.
        unsafe { &*self.meta.afs.get() }
    }

    pub fn afs_mut(&mut self) -> &mut Afs {
        // SAFETY: lock held, and &mut self prevents aliasing through this guard.
        unsafe { &mut *self.meta.afs.get() }
    }

    /// Buffer handle stored in the data reference, if any.
    pub fn data(&self) -> Option<u64> {
        match self.meta.data_ref.load(Ordering::Relaxed) >> 1 {
            0 => None,
            h => Some(h - 1),
        }
    }

    pub fn set_data(&mut self, handle: Option<u64>) {
        let encoded = handle.map_or(0, |h| {
            assert!(h < (1 << 62), "buffer handle too large");
            (h + 1) << 1
        });
        self.meta
            .data_ref
            .store(encoded | LOCK_BIT, Ordering::Relaxed);
    }
}

impl Drop for MetaGuard<'_> {
    fn drop(&mut self) {
        self.meta.data_ref.fetch_and(!LOCK_BIT, Ordering::Release);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    #[test]
    fn layout() {
        assert_eq!(std::mem::size_of::<BlockMeta>(), 64);
        assert_eq!(SPARSE_CAPACITY, 11);
        assert_eq!(DENSE_SPAN, 360);
    }

    #[test]
    fn insert_is_idempotent() {
        let mut a = Afs::new(100);
        assert!(a.insert(105).unwrap());
        assert!(!a.insert(105).unwrap());
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn twelfth_insert_goes_dense() {
        let mut a = Afs::new(0);
        let ids = [300, 3, 7, 1, 359, 0, 42, 43, 44, 200, 201];
        for &v in &ids {
            a.insert(v).unwrap();
        }
        assert!(!a.is_dense());
        a.insert(150).unwrap();
        assert!(a.is_dense());
        let mut want: Vec<u32> = ids.to_vec();
        want.push(150);
        want.sort();
        assert_eq!(a.members(), want);
        assert!(a.insert(360).is_err());
        assert_eq!(a.drain(), want);
        assert!(a.is_empty() && !a.is_dense());
    }

    #[test]
    fn out_of_range_rejected() {
        let mut a = Afs::new(10);
        assert!(matches!(a.insert(9), Err(Error::Invariant(_))));
        assert!(!a.contains(9));
    }

    #[test]
    fn randomized_membership() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let start = rng.gen_range(0..1000u32);
            let mut a = Afs::new(start);
            let mut reference = BTreeSet::new();
            for _ in 0..rng.gen_range(0..60) {
                let v = start + rng.gen_range(0..DENSE_SPAN);
                assert_eq!(a.insert(v).unwrap(), reference.insert(v));
                assert_eq!(a.len(), reference.len());
            }
            assert_eq!(a.members(), reference.iter().copied().collect::<Vec<_>>());
        }
    }

    #[test]
    fn lock_guards_data_and_state() {
        let m = BlockMeta::new(0, i32::MAX);
        {
            let mut g = m.lock();
            assert_eq!(g.data(), None);
            g.set_data(Some(0));
            g.set_state(BlockState::Cached);
            assert_eq!(g.data(), Some(0));
        }
        assert_eq!(m.state_hint(), BlockState::Cached);
        assert_eq!(m.lock().data(), Some(0));
    }

    #[test]
    fn lock_is_exclusive() {
        let m = Arc::new(BlockMeta::new(0, 0));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let m = &m;
                s.spawn(move || {
                    for _ in 0..2000 {
                        let mut g = m.lock();
                        let p = g.priority();
                        g.set_priority(p + 1);
                    }
                });
            }
        });
        assert_eq!(m.lock().priority(), 16000);
    }

    #[test]
    fn transitions() {
        use BlockState::*;
        assert!(BlockState::is_legal(Inactive, Uncached));
        assert!(BlockState::is_legal(Cached, Uncached));
        assert!(!BlockState::is_legal(Inactive, Cached));
        assert!(!BlockState::is_legal(Reactivated, Inactive));
        assert!(!BlockState::is_legal(Uncached, Processing));
    }
}
