//! Dual-queue worklist: a FIFO of memory-resident blocks, a priority queue of
//! blocks awaiting load, and a FIFO of activated mini vertices.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicI32, AtomicI64, AtomicU32, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crossbeam_queue::SegQueue;

use super::engine::{Priority, PriorityOrder, RunConfig};
use super::events::{EventLog, VertexEventKind};
use super::io::{AsyncReader, PageDst, ReadCompletion, ReadRequest};
use super::meta::{BlockMeta, BlockState, MetaGuard};
use super::pool::{BufferPool, SlotId};
use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::metrics::Counters;
use crate::storage::{OpenImage, Page};

/// Mini vertices handed out per task.
pub const MINI_BATCH: usize = 256;
/// Read attempts per block before the run fails.
pub const MAX_READ_ATTEMPTS: u32 = 3;

/// Handle marking a run that lives in an overflow buffer instead of the pool.
const OVERFLOW_HANDLE: u64 = 1 << 40;

pub(crate) enum Task {
    Mini(Vec<VertexId>),
    Block {
        block: u32,
        frontier: Vec<VertexId>,
        pages: *const Page,
        page_count: usize,
    },
}

#[derive(Debug, Default)]
struct UncachedQueue {
    heap: BinaryHeap<(i64, Reverse<u32>, u32)>,
    generation: Vec<u32>,
}

/// Activations collected by a synchronous round.
#[derive(Debug)]
pub(crate) struct SyncSink {
    order: PriorityOrder,
    seen: Vec<AtomicBool>,
    priority: Vec<AtomicI32>,
    list: Mutex<Vec<VertexId>>,
}

impl SyncSink {
    pub(crate) fn new(n: usize, order: PriorityOrder) -> Self {
        SyncSink {
            order,
            seen: (0..n).map(|_| AtomicBool::new(false)).collect(),
            priority: (0..n).map(|_| AtomicI32::new(order.neutral())).collect(),
            list: Mutex::new(Vec::new()),
        }
    }

    fn add(&self, batch: &[(VertexId, Priority)]) {
        let mut fresh = Vec::new();
        for &(v, p) in batch {
            let slot = &self.priority[v as usize];
            match self.order {
                PriorityOrder::MinFirst => slot.fetch_min(p, Ordering::Relaxed),
                PriorityOrder::MaxFirst => slot.fetch_max(p, Ordering::Relaxed),
            };
            if !self.seen[v as usize].swap(true, Ordering::Relaxed) {
                fresh.push(v);
            }
        }
        if !fresh.is_empty() {
            self.list.lock().unwrap().extend(fresh);
        }
    }

    pub(crate) fn into_entries(self) -> Vec<(VertexId, Priority)> {
        let mut list = self.list.into_inner().unwrap();
        list.sort_unstable();
        list.into_iter()
            .map(|v| (v, self.priority[v as usize].load(Ordering::Relaxed)))
            .collect()
    }
}

pub(crate) struct Worklist<'a> {
    image: &'a OpenImage,
    config: &'a RunConfig,
    counters: &'a Counters,
    events: Option<&'a EventLog>,
    sink: Option<&'a SyncSink>,
    round: u64,
    trace: Option<&'a Mutex<Vec<(u32, u32)>>>,

    metas: Box<[BlockMeta]>,
    reuse: Box<[AtomicU32]>,
    /// Vertices whose lists were consumed since the block was last loaded.
    touched: Box<[[AtomicU64; 6]]>,
    cached: SegQueue<u32>,
    uncached: Mutex<UncachedQueue>,
    resident: SegQueue<VertexId>,
    mini_pending: Box<[AtomicBool]>,
    outstanding: AtomicI64,
    in_flight: AtomicU64,

    aborted: AtomicBool,
    failure: Mutex<Option<Error>>,

    // Dropped before the memory it writes into.
    reader: AsyncReader,
    pool: BufferPool,
    overflow: Mutex<HashMap<u32, Box<[Page]>>>,
}

// SAFETY: raw page pointers only ever reference `pool` or `overflow`, whose
// access is coordinated through block states.
unsafe impl Sync for Worklist<'_> {}

pub(crate) struct WorklistParts<'a> {
    pub image: &'a OpenImage,
    pub config: &'a RunConfig,
    pub counters: &'a Counters,
    pub events: Option<&'a EventLog>,
    pub sink: Option<&'a SyncSink>,
    pub round: u64,
    pub trace: Option<&'a Mutex<Vec<(u32, u32)>>>,
}

impl<'a> Worklist<'a> {
    pub(crate) fn new(parts: WorklistParts<'a>) -> Result<Self> {
        let WorklistParts { image, config, counters, events, sink, round, trace } = parts;
        let nb = image.block_count() as usize;
        let neutral = config.priority_order.neutral();
        let metas: Box<[BlockMeta]> = (0..nb)
            .map(|b| {
                let first = image.block_first_id(b as u32);
                BlockMeta::new(if first == u32::MAX { 0 } else { first }, neutral)
            })
            .collect();
        let capacity = (config.buffer_bytes / crate::image::PAGE_BYTES as u64)
            .min(nb as u64)
            .clamp(1, u32::MAX as u64) as usize;
        let n_mini = (image.n_total() - image.n_reordered()) as usize;
        Ok(Worklist {
            image,
            config,
            counters,
            events,
            sink,
            round,
            trace,
            metas,
            reuse: (0..nb).map(|_| AtomicU32::new(0)).collect(),
            touched: (0..nb).map(|_| Default::default()).collect(),
            cached: SegQueue::new(),
            uncached: Mutex::new(UncachedQueue {
                heap: BinaryHeap::new(),
                generation: vec![0; nb],
            }),
            resident: SegQueue::new(),
            mini_pending: (0..n_mini).map(|_| AtomicBool::new(false)).collect(),
            outstanding: AtomicI64::new(0),
            in_flight: AtomicU64::new(0),
            aborted: AtomicBool::new(false),
            failure: Mutex::new(None),
            reader: AsyncReader::new(image.blocks_path(), config.io_workers, config.direct_io)?,
            pool: BufferPool::new(capacity),
            overflow: Mutex::new(HashMap::new()),
        })
    }

    pub(crate) fn outstanding(&self) -> i64 {
        self.outstanding.load(Ordering::Acquire)
    }

    pub(crate) fn is_aborted(&self) -> bool {
        self.aborted.load(Ordering::Acquire)
    }

    pub(crate) fn abort(&self, err: Error) {
        let mut f = self.failure.lock().unwrap();
        if f.is_none() {
            *f = Some(err);
        }
        self.aborted.store(true, Ordering::Release);
    }

    pub(crate) fn take_failure(&self) -> Option<Error> {
        self.failure.lock().unwrap().take()
    }

    #[doc(hidden)]
    pub(crate) fn reader(&self) -> &AsyncReader {
        &self.reader
    }

    fn transition(&self, block: u32, g: &mut MetaGuard<'_>, to: BlockState) {
        let from = g.state();
        debug_assert!(BlockState::is_legal(from, to), "{from:?} -> {to:?}");
        g.set_state(to);
        if let Some(ev) = self.events {
            ev.transition(block, from, to);
        }
    }

    fn heap_key(&self, p: Priority) -> i64 {
        match self.config.priority_order {
            PriorityOrder::MinFirst => -(p as i64),
            PriorityOrder::MaxFirst => p as i64,
        }
    }

    /// Caller holds the block's meta lock.
    fn push_uncached(&self, block: u32, p: Priority) {
        let mut q = self.uncached.lock().unwrap();
        let g = &mut q.generation[block as usize];
        *g = g.wrapping_add(1);
        let gen = *g;
        q.heap.push((self.heap_key(p), Reverse(block), gen));
    }

    fn pop_uncached(&self) -> Option<u32> {
        let mut q = self.uncached.lock().unwrap();
        while let Some((_, Reverse(b), gen)) = q.heap.pop() {
            if q.generation[b as usize] == gen {
                q.generation[b as usize] = gen.wrapping_add(1);
                return Some(b);
            }
        }
        None
    }

    /// Routes activations: mini vertices to the resident queue, large ones to
    /// their block's frontier set.
    pub(crate) fn submit(&self, batch: &[(VertexId, Priority)]) -> Result<()> {
        if let Some(sink) = self.sink {
            if let Some(ev) = self.events {
                for &(v, _) in batch {
                    ev.vertex(self.round, v, VertexEventKind::Activated);
                }
            }
            sink.add(batch);
            return Ok(());
        }
        self.submit_direct(batch)
    }

    pub(crate) fn submit_direct(&self, batch: &[(VertexId, Priority)]) -> Result<()> {
        let first_mini = self.image.first_mini_id();
        let order = self.config.priority_order;
        let (mut fresh, mut merged) = (0u64, 0u64);
        for &(v, p) in batch {
            if v >= first_mini {
                if !self.mini_pending[(v - first_mini) as usize].swap(true, Ordering::AcqRel) {
                    self.outstanding.fetch_add(1, Ordering::AcqRel);
                    self.resident.push(v);
                    fresh += 1;
                } else {
                    merged += 1;
                }
                continue;
            }
            let b = self.image.block_id_unchecked(v);
            let mut g = self.metas[b as usize].lock();
            if g.afs_mut().insert(v)? {
                fresh += 1;
            } else {
                merged += 1;
            }
            let old = g.priority();
            let new = order.combine(old, p);
            g.set_priority(new);
            match g.state() {
                BlockState::Inactive => {
                    self.transition(b, &mut g, BlockState::Uncached);
                    self.outstanding.fetch_add(1, Ordering::AcqRel);
                    self.push_uncached(b, new);
                }
                BlockState::Uncached => {
                    if new != old && g.data().is_none() {
                        self.push_uncached(b, new);
                    }
                }
                BlockState::Processing => self.transition(b, &mut g, BlockState::Reactivated),
                BlockState::Cached | BlockState::Reactivated => {}
            }
        }
        self.counters.add(&self.counters.activations, fresh);
        self.counters.add(&self.counters.activations_coalesced, merged);
        Ok(())
    }

    fn on_completion(&self, c: ReadCompletion) {
        let req = c.request;
        if let Err(e) = c.result {
            if req.attempt < MAX_READ_ATTEMPTS {
                self.counters.add(&self.counters.read_retries, 1);
                self.reader.submit(ReadRequest { attempt: req.attempt + 1, ..req });
            } else {
                self.in_flight.fetch_sub(1, Ordering::AcqRel);
                self.abort(Error::io(
                    self.image.blocks_path(),
                    std::io::Error::new(
                        e.kind(),
                        format!("block {} failed after {} attempts: {e}", req.block, req.attempt),
                    ),
                ));
            }
            return;
        }
        self.counters.record_read(req.pages as u64);
        self.counters.add(&self.counters.blocks_loaded, 1);
        for w in &self.touched[req.block as usize] {
            w.store(0, Ordering::Relaxed);
        }
        let mut g = self.metas[req.block as usize].lock();
        debug_assert!(g.state() == BlockState::Uncached && g.data().is_some());
        self.transition(req.block, &mut g, BlockState::Cached);
        self.cached.push(req.block);
        drop(g);
        self.in_flight.fetch_sub(1, Ordering::AcqRel);
    }

    fn harvest(&self) {
        if self.config.threads == 1 {
            self.harvest_in_order();
            return;
        }
        for c in self.reader.try_harvest() {
            self.on_completion(c);
        }
    }

    /// Single-executor runs wait for every read in flight and apply the
    /// completions by block id, so the schedule does not depend on reader
    /// timing and outputs are bit-reproducible.
    fn harvest_in_order(&self) {
        loop {
            let pending = self.in_flight.load(Ordering::Acquire) as usize;
            if pending == 0 || self.is_aborted() {
                return;
            }
            let mut done = Vec::with_capacity(pending);
            while done.len() < pending {
                done.extend(self.reader.harvest_timeout(Duration::from_millis(10)));
            }
            done.sort_by_key(|c| c.request.block);
            for c in done {
                self.on_completion(c);
            }
        }
    }

    /// Blocks briefly for outstanding reads, or backs off when none are pending.
    pub(crate) fn idle_wait(&self, spins: &mut u32) {
        if self.config.threads == 1 {
            self.harvest_in_order();
        }
        if self.in_flight.load(Ordering::Acquire) > 0 {
            for c in self.reader.harvest_timeout(Duration::from_micros(500)) {
                self.on_completion(c);
            }
        } else if *spins < 32 {
            *spins += 1;
            std::thread::yield_now();
        } else {
            std::thread::sleep(Duration::from_micros(50));
        }
    }

    fn release(&self, block: u32, handle: u64) {
        if handle == OVERFLOW_HANDLE {
            self.overflow.lock().unwrap().remove(&block);
        } else {
            self.pool
                .release_run(handle as SlotId, self.image.block_pages(block) as usize);
        }
    }

    /// Harvests finished reads, then issues reads for the highest-priority
    /// uncached blocks that can get buffer space.
    pub(crate) fn preload(&self) {
        self.harvest();
        if self.is_aborted() {
            return;
        }
        for _ in 0..self.config.preload_batch.max(1) {
            let Some(b) = self.pop_uncached() else { break };
            let pages = self.image.block_pages(b) as usize;
            debug_assert!(pages > 0, "block {b} is the tail of a run");
            let (handle, dst) = if pages > self.pool.capacity() {
                let mut buf: Box<[Page]> = vec![Page::zeroed(); pages].into_boxed_slice();
                let ptr = buf.as_mut_ptr();
                self.overflow.lock().unwrap().insert(b, buf);
                (OVERFLOW_HANDLE, ptr)
            } else {
                match self.pool.alloc_contiguous(pages) {
                    Some(s) => (s as u64, self.pool.run_ptr(s)),
                    None => {
                        // Keep the head block first in line; no later block
                        // may take the space it is waiting for.
                        let g = self.metas[b as usize].lock();
                        if g.state() == BlockState::Uncached && g.data().is_none() {
                            self.push_uncached(b, g.priority());
                        }
                        break;
                    }
                }
            };
            let mut g = self.metas[b as usize].lock();
            if g.state() != BlockState::Uncached || g.data().is_some() {
                drop(g);
                self.release(b, handle);
                continue;
            }
            g.set_data(Some(handle));
            drop(g);
            self.in_flight.fetch_add(1, Ordering::AcqRel);
            self.reader.submit(ReadRequest {
                block: b,
                pages: pages as u16,
                dst: PageDst(dst),
                attempt: 1,
            });
        }
    }

    /// Resident mini vertices first, then up to `batch` cached blocks. Empty
    /// means nothing is runnable right now; check `outstanding` for termination.
    pub(crate) fn pull(&self, batch: usize) -> Result<Vec<Task>> {
        self.preload();
        let mut tasks = Vec::new();
        let first_mini = self.image.first_mini_id();
        let mut minis = Vec::new();
        while minis.len() < MINI_BATCH {
            let Some(v) = self.resident.pop() else { break };
            self.mini_pending[(v - first_mini) as usize].store(false, Ordering::Release);
            minis.push(v);
        }
        if !minis.is_empty() {
            self.counters.add(&self.counters.mini_tasks, 1);
            tasks.push(Task::Mini(minis));
        }
        for _ in 0..batch.max(1) {
            let Some(b) = self.cached.pop() else { break };
            let mut g = self.metas[b as usize].lock();
            if g.state() != BlockState::Cached {
                return Err(Error::Invariant(format!(
                    "block {b} in cached queue while {:?}",
                    g.state()
                )));
            }
            self.transition(b, &mut g, BlockState::Processing);
            let frontier = g.afs_mut().drain();
            g.set_priority(self.config.priority_order.neutral());
            let handle = g.data().ok_or_else(|| {
                Error::Invariant(format!("cached block {b} has no buffer"))
            })?;
            drop(g);
            let page_count = self.image.block_pages(b) as usize;
            let pages = if handle == OVERFLOW_HANDLE {
                self.overflow.lock().unwrap()[&b].as_ptr()
            } else {
                self.pool.run_ptr(handle as SlotId) as *const Page
            };
            self.counters.add(&self.counters.block_tasks, 1);
            if let Some(t) = self.trace {
                t.lock().unwrap().push((self.round as u32, b));
            }
            tasks.push(Task::Block { block: b, frontier, pages, page_count });
        }
        Ok(tasks)
    }

    /// Marks `v` consumed from the current copy of block `b`; returns whether
    /// this is the first time since the block was loaded.
    pub(crate) fn first_touch(&self, b: u32, v: VertexId) -> bool {
        let rel = (v - self.image.block_first_id(b)) as usize;
        let bit = 1u64 << (rel % 64);
        self.touched[b as usize][rel / 64].fetch_or(bit, Ordering::Relaxed) & bit == 0
    }

    pub(crate) fn finish_mini(&self, count: usize) {
        self.outstanding.fetch_sub(count as i64, Ordering::AcqRel);
    }

    /// Ends a block task: reuse the buffer if the block was reactivated,
    /// otherwise release it.
    pub(crate) fn finish(&self, b: u32) -> Result<()> {
        let mut g = self.metas[b as usize].lock();
        match g.state() {
            BlockState::Processing => {
                self.transition(b, &mut g, BlockState::Inactive);
                let h = g.data();
                g.set_data(None);
                self.reuse[b as usize].store(0, Ordering::Relaxed);
                drop(g);
                self.outstanding.fetch_sub(1, Ordering::AcqRel);
                if let Some(h) = h {
                    self.release(b, h);
                }
            }
            BlockState::Reactivated => {
                let r = self.reuse[b as usize].fetch_add(1, Ordering::Relaxed) + 1;
                let threshold = self.config.early_stop_threshold;
                self.transition(b, &mut g, BlockState::Cached);
                if threshold > 0 && r > threshold {
                    self.transition(b, &mut g, BlockState::Uncached);
                    let h = g.data();
                    g.set_data(None);
                    self.reuse[b as usize].store(0, Ordering::Relaxed);
                    self.push_uncached(b, g.priority());
                    drop(g);
                    self.counters.add(&self.counters.blocks_evicted, 1);
                    if let Some(h) = h {
                        self.release(b, h);
                    }
                } else {
                    self.cached.push(b);
                    drop(g);
                    self.counters.add(&self.counters.blocks_reused, 1);
                }
            }
            s => {
                return Err(Error::Contract(format!("finish on block {b} in state {s:?}")));
            }
        }
        Ok(())
    }

    /// Releases every buffer still held; used after an aborted run.
    pub(crate) fn drain_after_abort(&self) {
        while self.in_flight.load(Ordering::Acquire) > 0 {
            let done = self.reader.harvest_timeout(Duration::from_millis(10));
            for c in done {
                self.in_flight.fetch_sub(1, Ordering::AcqRel);
                drop(c);
            }
        }
    }
}
